#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "svae/kernels.hpp"
#include "svae/metrics.hpp"
#include "svae/signal.hpp"

namespace svae::metrics {

double si_sdr(std::span<const double> reference,
              std::span<const double> estimate) {
  if (reference.size() != estimate.size())
    throw std::invalid_argument("si_sdr: length mismatch");
  const auto& k = kernels::active();
  const std::size_t n = reference.size();
  const double ref_energy = k.dot(reference.data(), reference.data(), n);
  if (ref_energy <= 0.0)
    throw std::invalid_argument("si_sdr: zero reference");

  const double scale = k.dot(estimate.data(), reference.data(), n) / ref_energy;
  double target_energy = 0.0, residual_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double target = scale * reference[i];
    const double res = target - estimate[i];
    target_energy += target * target;
    residual_energy += res * res;
  }
  if (residual_energy == 0.0)
    return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(target_energy / residual_energy);
}

double reconstruction_snr(std::span<const double> reference,
                          std::span<const double> estimate) {
  if (reference.size() != estimate.size())
    throw std::invalid_argument("reconstruction_snr: length mismatch");
  const auto& k = kernels::active();
  const double ref_energy =
      k.dot(reference.data(), reference.data(), reference.size());
  if (ref_energy <= 0.0)
    throw std::invalid_argument("reconstruction_snr: zero reference");
  double err = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference[i] - estimate[i];
    err += d * d;
  }
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ref_energy / err);
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  std::vector<double> finite;
  for (double v : values) {
    if (std::isinf(v))
      a.infinite_count += 1;
    else
      finite.push_back(v);
  }
  a.finite_count = static_cast<int>(finite.size());
  if (finite.empty()) return a;
  double sum = 0.0;
  for (double v : finite) sum += v;
  a.mean = sum / static_cast<double>(finite.size());
  std::sort(finite.begin(), finite.end());
  const std::size_t m = finite.size() / 2;
  a.median = finite.size() % 2 ? finite[m] : 0.5 * (finite[m - 1] + finite[m]);
  return a;
}

MetricReport evaluate_corpus(const std::vector<EvalPair>& pairs) {
  if (pairs.empty())
    throw std::invalid_argument("evaluate_corpus: empty pair list");
  MetricReport report;
  std::vector<double> in_vals, out_vals;
  for (const auto& pair : pairs) {
    const signal::AudioClip ref = signal::read_wav(pair.reference_path);
    const signal::AudioClip noisy = signal::read_wav(pair.noisy_path);
    const signal::AudioClip est = signal::read_wav(pair.estimate_path);
    const std::size_t n = std::min(
        {ref.samples.size(), noisy.samples.size(), est.samples.size()});
    if (n == 0) throw std::runtime_error("evaluate_corpus: empty clip");

    UtteranceRecord rec;
    rec.id = pair.id;
    rec.group = pair.group;
    rec.input_si_sdr = si_sdr({ref.samples.data(), n}, {noisy.samples.data(), n});
    rec.output_si_sdr = si_sdr({ref.samples.data(), n}, {est.samples.data(), n});
    in_vals.push_back(rec.input_si_sdr);
    out_vals.push_back(rec.output_si_sdr);
    report.records.push_back(std::move(rec));
  }
  report.input_si_sdr = aggregate(in_vals);
  report.output_si_sdr = aggregate(out_vals);
  return report;
}

std::string format_report(const MetricReport& report) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "id\tgroup\tinput_si_sdr_db\toutput_si_sdr_db\n";
  for (const auto& r : report.records) {
    out << r.id << "\t" << r.group << "\t" << r.input_si_sdr << "\t"
        << r.output_si_sdr << "\n";
  }
  out << "# aggregate\tmean_in\t" << report.input_si_sdr.mean << "\tmedian_in\t"
      << report.input_si_sdr.median << "\tmean_out\t"
      << report.output_si_sdr.mean << "\tmedian_out\t"
      << report.output_si_sdr.median << "\tinf_excluded\t"
      << report.input_si_sdr.infinite_count +
             report.output_si_sdr.infinite_count
      << "\n";
  return out.str();
}

}  // namespace svae::metrics
