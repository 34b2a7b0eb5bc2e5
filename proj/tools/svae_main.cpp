#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "svae/enhancer.hpp"
#include "svae/genmodel.hpp"
#include "svae/metrics.hpp"
#include "svae/signal.hpp"
#include "svae/synth.hpp"

namespace {

namespace fs = std::filesystem;
using namespace svae;

struct RunConfig {
  int window_len = 1024;
  int hop = 256;
  int latent_dim = 32;
  int hidden = 128;
  double learning_rate = 1e-4;
  int batch_size = 128;
  int patience = 20;
  int max_epochs = 200;
  double alpha = 100.0;
  double beta = 100.0;
  int nmf_rank = 8;
  int em_iters = 100;
  double estep_lr = 0.005;
  int estep_iters = 10;
  std::uint64_t seed = 0;
};

void add_config_options(CLI::App& app, RunConfig& cfg) {
  app.add_option("--window-len", cfg.window_len, "STFT window length (samples)");
  app.add_option("--hop", cfg.hop, "STFT hop (samples)");
  app.add_option("--latent-dim", cfg.latent_dim, "latent dimension L");
  app.add_option("--hidden", cfg.hidden, "hidden layer width");
  app.add_option("--lr", cfg.learning_rate, "training learning rate");
  app.add_option("--batch", cfg.batch_size, "minibatch size (frames)");
  app.add_option("--patience", cfg.patience, "early-stopping patience (epochs)");
  app.add_option("--max-epochs", cfg.max_epochs, "epoch cap");
  app.add_option("--alpha", cfg.alpha, "Gamma prior shape");
  app.add_option("--beta", cfg.beta, "Gamma prior rate");
  app.add_option("--nmf-rank", cfg.nmf_rank, "NMF rank K");
  app.add_option("--em-iters", cfg.em_iters, "EM iterations for enhancement");
  app.add_option("--estep-lr", cfg.estep_lr, "E-step Adam learning rate");
  app.add_option("--estep-iters", cfg.estep_iters, "E-step Adam iterations");
  app.add_option("--seed", cfg.seed, "RNG seed");
}

void print_config(const RunConfig& c) {
  std::printf("window_len=%d\n", c.window_len);
  std::printf("hop=%d\n", c.hop);
  std::printf("latent_dim=%d\n", c.latent_dim);
  std::printf("hidden=%d\n", c.hidden);
  std::printf("lr=%.17g\n", c.learning_rate);
  std::printf("batch=%d\n", c.batch_size);
  std::printf("patience=%d\n", c.patience);
  std::printf("max_epochs=%d\n", c.max_epochs);
  std::printf("alpha=%.17g\n", c.alpha);
  std::printf("beta=%.17g\n", c.beta);
  std::printf("nmf_rank=%d\n", c.nmf_rank);
  std::printf("em_iters=%d\n", c.em_iters);
  std::printf("estep_lr=%.17g\n", c.estep_lr);
  std::printf("estep_iters=%d\n", c.estep_iters);
  std::printf("seed=%llu\n", static_cast<unsigned long long>(c.seed));
}

signal::StftConfig stft_from(const RunConfig& c) {
  signal::StftConfig s;
  s.window_len = c.window_len;
  s.hop = c.hop;
  s.validate();
  return s;
}

int require_file(const std::string& path) {
  if (!fs::exists(path)) {
    std::cerr << "error: no such file: " << path << "\n";
    return 2;
  }
  return 0;
}

int cmd_synth(const RunConfig& cfg, const std::string& out_dir, int train_clips,
              int valid_clips, int test_clips, int noise_clips,
              double clip_seconds) {
  synth::SynthConfig sc;
  sc.seed = cfg.seed;
  sc.train_clips = train_clips;
  sc.valid_clips = valid_clips;
  sc.test_clips = test_clips;
  sc.noise_clips = noise_clips;
  sc.clip_seconds = clip_seconds;
  const synth::CorpusPaths paths = synth::synthesize_corpus(sc, out_dir);
  std::cout << "train_manifest\t" << paths.train_manifest << "\n"
            << "train_outlier_manifest\t" << paths.train_outlier_manifest
            << "\n"
            << "valid_manifest\t" << paths.valid_manifest << "\n"
            << "test_manifest\t" << paths.test_manifest << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& manifest,
              const std::string& valid_manifest, const std::string& model,
              const std::string& out_ckpt, const std::string& loss_log) {
  if (int rc = require_file(manifest)) return rc;
  if (int rc = require_file(valid_manifest)) return rc;
  if (model != "vae" && model != "stvae") {
    std::cerr << "error: --model must be vae or stvae\n";
    return 2;
  }
  const auto kind = model == "vae" ? genmodel::ModelKind::Vae
                                   : genmodel::ModelKind::Stvae;

  const signal::StftConfig stft = stft_from(cfg);
  Rng rng(cfg.seed);
  genmodel::Checkpoint init = genmodel::make_checkpoint(
      kind, stft, cfg.latent_dim, cfg.hidden, {cfg.alpha, cfg.beta}, rng);

  const auto train_pool =
      genmodel::load_frames(genmodel::read_manifest(manifest), stft);
  const auto valid_pool =
      genmodel::load_frames(genmodel::read_manifest(valid_manifest), stft);
  genmodel::warm_start_decoder_bias(init, train_pool);

  genmodel::TrainConfig tc;
  tc.adam.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.patience = cfg.patience;
  tc.max_epochs = cfg.max_epochs;
  tc.seed = cfg.seed;

  const genmodel::TrainResult result =
      genmodel::train(init, train_pool, valid_pool, tc);

  if (!loss_log.empty()) {
    std::ofstream log(loss_log);
    log << "epoch,train_loss,valid_loss\n";
    for (const auto& r : result.history)
      log << r.epoch << "," << r.train_loss << "," << r.valid_loss << "\n";
  }
  if (result.diverged) {
    std::cerr << "error: training diverged (non-finite loss)\n";
    return 1;
  }
  genmodel::save_checkpoint(result.best, out_ckpt);
  std::cout << "epochs\t" << result.history.size() << "\n"
            << "best_valid_loss\t"
            << (result.history.empty()
                    ? 0.0
                    : std::min_element(result.history.begin(),
                                       result.history.end(),
                                       [](const auto& a, const auto& b) {
                                         return a.valid_loss < b.valid_loss;
                                       })
                          ->valid_loss)
            << "\n";
  return 0;
}

int cmd_autoencode(const std::string& ckpt_path, const std::string& wav_in,
                   const std::string& wav_out) {
  if (int rc = require_file(ckpt_path)) return rc;
  if (int rc = require_file(wav_in)) return rc;
  const genmodel::Checkpoint ckpt = genmodel::load_checkpoint(ckpt_path);
  const signal::AudioClip clip = signal::read_wav(wav_in);
  const signal::Spectrogram spec = signal::stft(clip, ckpt.stft);
  const signal::Spectrogram recon = genmodel::autoencode(ckpt, spec);
  signal::write_wav(signal::istft(recon, clip.sample_rate), wav_out);

  // magnitude-domain reconstruction SNR
  std::vector<double> ref_mag(spec.data.size()), est_mag(spec.data.size());
  for (std::size_t i = 0; i < spec.data.size(); ++i) {
    ref_mag[i] = std::abs(spec.data[i]);
    est_mag[i] = std::abs(recon.data[i]);
  }
  std::printf("reconstruction_snr_db\t%.6f\n",
              metrics::reconstruction_snr(ref_mag, est_mag));
  return 0;
}

int cmd_enhance(const RunConfig& cfg, const std::string& ckpt_path,
                const std::string& wav_in, const std::string& wav_out,
                bool baseline, const std::string& trace_path) {
  if (int rc = require_file(ckpt_path)) return rc;
  if (int rc = require_file(wav_in)) return rc;
  const genmodel::Checkpoint ckpt = genmodel::load_checkpoint(ckpt_path);
  const signal::AudioClip clip = signal::read_wav(wav_in);
  const signal::Spectrogram noisy = signal::stft(clip, ckpt.stft);

  enhancer::EnhanceOptions opts;
  opts.nmf_rank = cfg.nmf_rank;
  opts.em_iters = cfg.em_iters;
  opts.estep_iters = cfg.estep_iters;
  opts.estep_lr = cfg.estep_lr;
  opts.baseline = baseline;

  Rng rng(cfg.seed);
  const enhancer::EnhanceResult result =
      enhancer::em_enhance(ckpt, noisy, opts, rng);
  signal::write_wav(signal::istft(result.estimate, clip.sample_rate), wav_out);

  if (!trace_path.empty()) {
    std::ofstream trace(trace_path);
    trace << "iter,loglik\n";
    for (std::size_t i = 0; i < result.diagnostics.loglik_trace.size(); ++i)
      trace << i + 1 << "," << result.diagnostics.loglik_trace[i] << "\n";
  }
  if (result.diagnostics.ascent_violations > 0) {
    std::cerr << "warning: " << result.diagnostics.ascent_violations
              << " EM iterations decreased the log-likelihood\n";
  }
  return 0;
}

int cmd_eval(const std::string& pairs_path, const std::string& report_out) {
  if (int rc = require_file(pairs_path)) return rc;
  std::ifstream in(pairs_path);
  std::vector<metrics::EvalPair> pairs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    metrics::EvalPair p;
    if (!std::getline(ls, p.id, '\t') || !std::getline(ls, p.group, '\t') ||
        !std::getline(ls, p.reference_path, '\t') ||
        !std::getline(ls, p.noisy_path, '\t') ||
        !std::getline(ls, p.estimate_path, '\t')) {
      std::cerr << "error: malformed pairs line: " << line << "\n";
      return 2;
    }
    pairs.push_back(std::move(p));
  }
  if (pairs.empty()) {
    std::cerr << "error: empty pairs manifest\n";
    return 2;
  }
  const metrics::MetricReport report = metrics::evaluate_corpus(pairs);
  const std::string text = metrics::format_report(report);
  if (report_out.empty() || report_out == "-") {
    std::cout << text;
  } else {
    std::ofstream out(report_out);
    out << text;
    if (!out) {
      std::cerr << "error: cannot write report: " << report_out << "\n";
      return 1;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weighted-variance VAE speech modeling and enhancement"};
  app.require_subcommand(0, 1);
  app.fallthrough();  // global options may follow the subcommand name

  RunConfig cfg;
  add_config_options(app, cfg);
  app.set_config("--config", "", "flat key=value config file");
  bool do_print_config = false;
  app.add_flag("--print-config", do_print_config,
               "print the effective configuration and exit");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string out_dir;
  int train_clips = 40, valid_clips = 8, test_clips = 8, noise_clips = 12;
  double clip_seconds = 3.0;
  synth_cmd->add_option("--out", out_dir, "output directory")->required();
  synth_cmd->add_option("--train-clips", train_clips, "training clips");
  synth_cmd->add_option("--valid-clips", valid_clips, "validation clips");
  synth_cmd->add_option("--test-clips", test_clips, "test clips");
  synth_cmd->add_option("--noise-clips", noise_clips, "noise clips");
  synth_cmd->add_option("--clip-seconds", clip_seconds, "clip length (s)");

  auto* train_cmd = app.add_subcommand("train", "train a generative model");
  std::string manifest, valid_manifest, model = "stvae", out_ckpt, loss_log;
  train_cmd->add_option("--manifest", manifest, "training manifest")
      ->required();
  train_cmd->add_option("--valid", valid_manifest, "validation manifest")
      ->required();
  train_cmd->add_option("--model", model, "vae or stvae");
  train_cmd->add_option("--out", out_ckpt, "output checkpoint")->required();
  train_cmd->add_option("--loss-log", loss_log, "per-epoch loss CSV");

  auto* auto_cmd =
      app.add_subcommand("autoencode", "auto-encode a clean WAV file");
  std::string ckpt_path, wav_in, wav_out;
  auto_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")
      ->required();
  auto_cmd->add_option("--in", wav_in, "input WAV")->required();
  auto_cmd->add_option("--out", wav_out, "output WAV")->required();

  auto* enh_cmd = app.add_subcommand("enhance", "enhance a noisy WAV file");
  bool baseline = false;
  std::string trace_path;
  enh_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")
      ->required();
  enh_cmd->add_option("--in", wav_in, "noisy WAV")->required();
  enh_cmd->add_option("--out", wav_out, "enhanced WAV")->required();
  enh_cmd->add_flag("--baseline", baseline, "unweighted pipeline (w = 1)");
  enh_cmd->add_option("--trace", trace_path, "log-likelihood trace CSV");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate enhanced utterances");
  std::string pairs_path, report_out;
  eval_cmd
      ->add_option("--pairs", pairs_path,
                   "TSV: id, group, reference, noisy, estimate")
      ->required();
  eval_cmd->add_option("--out", report_out, "report path (- for stdout)");

  CLI11_PARSE(app, argc, argv);

  if (do_print_config) {
    print_config(cfg);
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cout << app.help();
    return 2;
  }

  try {
    if (synth_cmd->parsed())
      return cmd_synth(cfg, out_dir, train_clips, valid_clips, test_clips,
                       noise_clips, clip_seconds);
    if (train_cmd->parsed())
      return cmd_train(cfg, manifest, valid_manifest, model, out_ckpt,
                       loss_log);
    if (auto_cmd->parsed()) return cmd_autoencode(ckpt_path, wav_in, wav_out);
    if (enh_cmd->parsed())
      return cmd_enhance(cfg, ckpt_path, wav_in, wav_out, baseline, trace_path);
    if (eval_cmd->parsed()) return cmd_eval(pairs_path, report_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
