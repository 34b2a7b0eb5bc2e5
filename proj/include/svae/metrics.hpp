#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace svae::metrics {

// +infinity is the documented sentinel for a zero residual.
double si_sdr(std::span<const double> reference,
              std::span<const double> estimate);

// 10*log10(sum ref^2 / sum (ref-est)^2) over magnitude-spectrogram entries
// (or any aligned nonnegative arrays, including time-domain samples).
double reconstruction_snr(std::span<const double> reference,
                          std::span<const double> estimate);

struct UtteranceRecord {
  std::string id;
  std::string group;  // metadata key, e.g. "white/0dB"
  double input_si_sdr = 0.0;
  double output_si_sdr = 0.0;
};

struct Aggregate {
  double mean = 0.0;
  double median = 0.0;
  int finite_count = 0;
  int infinite_count = 0;
};

struct MetricReport {
  std::vector<UtteranceRecord> records;
  Aggregate input_si_sdr;
  Aggregate output_si_sdr;
};

Aggregate aggregate(const std::vector<double>& values);

struct EvalPair {
  std::string id;
  std::string group;
  std::string reference_path;
  std::string noisy_path;
  std::string estimate_path;
};

MetricReport evaluate_corpus(const std::vector<EvalPair>& pairs);

// Tab-separated: one record line per utterance, then an aggregate footer.
std::string format_report(const MetricReport& report);

}  // namespace svae::metrics
