#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "selftest.hpp"
#include "wdiff/pipeline.hpp"

using namespace wdiff;
using Eigen::Index;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string join(const std::vector<Index>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<Index> split_indices(const std::string& s) {
  std::vector<Index> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoll(item));
  return out;
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::map<std::string, std::string> kv;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto key = line.substr(0, eq), value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    kv[key] = value;
  }
  return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key, const std::string& src) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw Error(ErrorCode::ParseError, src + ": missing '" + key + "'");
  return it->second;
}

SamplerKind sampler_kind(const std::string& s) { return parse_sampler_kind(s); }

// ---- decompose / reconstruct ------------------------------------------------

struct DecomposeArgs {
  std::string input, out_dir, wavelet = "db2", mode = "symmetric";
  int levels = 0;
  Index window = 24, stride = 1;
};

void run_decompose(const DecomposeArgs& a) {
  const TimeSeriesBatch batch = load_dataset(a.input, a.window, a.stride);
  WaveletConfig w{a.wavelet, a.levels, parse_boundary_mode(a.mode)};
  const FilterBank fb = w.bank(batch.length());
  const Pyramid pyr = dwt(batch, fb, w.resolve_levels(batch.length()), w.mode);
  fs::create_directories(a.out_dir);
  for (std::size_t l = 0; l < pyr.levels.size(); ++l) {
    const std::string name = l + 1 == pyr.levels.size() ? "approx.csv" : "level_" + std::to_string(l + 1) + ".csv";
    write_file_atomic((fs::path(a.out_dir) / name).string(), batch_to_csv(pyr.levels[l]));
  }
  std::string header = "wavelet = " + fb.name() + "\nmode = " + to_string(w.mode) +
                       "\nsource_length = " + std::to_string(pyr.source_length) +
                       "\nlevel_lengths = " + join(pyr.level_lengths) +
                       "\nsamples = " + std::to_string(pyr.samples()) +
                       "\nfeatures = " + std::to_string(pyr.features()) + "\n";
  write_file_atomic((fs::path(a.out_dir) / "pyramid.txt").string(), header);
  std::printf("levels=%d\nlevel_lengths=%s\nsamples=%lld\n", pyr.depth(), join(pyr.level_lengths).c_str(),
              static_cast<long long>(pyr.samples()));
}

void run_reconstruct(const std::string& dir, const std::string& out) {
  const std::string header_path = (fs::path(dir) / "pyramid.txt").string();
  const auto kv = read_key_values(header_path);
  Pyramid pyr;
  pyr.mode = parse_boundary_mode(need(kv, "mode", header_path));
  pyr.source_length = std::stoll(need(kv, "source_length", header_path));
  pyr.level_lengths = split_indices(need(kv, "level_lengths", header_path));
  for (std::size_t l = 0; l <= pyr.level_lengths.size(); ++l) {
    const std::string name = l == pyr.level_lengths.size() ? "approx.csv" : "level_" + std::to_string(l + 1) + ".csv";
    const std::string path = (fs::path(dir) / name).string();
    pyr.levels.push_back(batch_from_table(load_csv(path), path));
  }
  const FilterBank fb = make_filter_bank(need(kv, "wavelet", header_path));
  write_file_atomic(out, batch_to_csv(idwt(pyr, fb)));
  std::printf("samples=%lld\nlength=%lld\n", static_cast<long long>(pyr.samples()),
              static_cast<long long>(pyr.source_length));
}

// ---- train / generate -------------------------------------------------------

struct TrainArgs {
  std::string config, data, out, loss_csv;
  std::vector<std::string> sets;
  int epochs = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool quiet = false;
};

void run_train(const TrainArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key=value, got '" + s + "'");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (a.epochs > 0) cfg.train.epochs = a.epochs;
  if (a.seed_given) cfg.train.seed = a.seed;

  const TimeSeriesBatch raw = load_dataset(a.data, cfg.data.window, cfg.data.stride);
  const auto start = std::chrono::steady_clock::now();
  const Index per_epoch = (raw.samples() + std::min<Index>(cfg.train.batch_size, raw.samples()) - 1) /
                          std::min<Index>(cfg.train.batch_size, raw.samples());
  const int total_steps = static_cast<int>(per_epoch) * cfg.train.epochs;
  const int every = std::max(1, total_steps / 20);
  const TrainedModel model = train_model(raw, cfg, [&](const LossRecord& r) {
    if (a.quiet || ((r.step + 1) % every != 0 && r.step + 1 != total_steps)) return;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "step %d/%d  epoch %d  loss %.5f  lr %.3g  %.0fs\n", r.step + 1, total_steps, r.epoch, r.total,
                 r.lr, secs);
  });
  save_checkpoint(a.out, model.checkpoint);
  const std::string loss_path = a.loss_csv.empty() ? a.out + ".loss.csv" : a.loss_csv;
  write_file_atomic(loss_path, loss_history_csv(model.history));
  std::printf("checkpoint=%s\nloss_csv=%s\nsteps=%zu\nfinal_loss=%s\n", a.out.c_str(), loss_path.c_str(),
              model.history.size(), fmt(model.history.back().total).c_str());
}

struct GenerateArgs {
  std::string checkpoint, out, sampler = "ddpm";
  Index n = 64;
  std::uint64_t seed = 0;
  int ddim_stride = 1;
};

void run_generate(const GenerateArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  SamplerConfig s = ck.config.sampler;
  s.sampler = sampler_kind(a.sampler);
  s.seed = a.seed;
  s.ddim_stride = a.ddim_stride;
  const TimeSeriesBatch out = generate(ck, a.n, s);
  if (!out.all_finite()) throw Error(ErrorCode::NonFiniteLoss, "generated samples contain non-finite values");
  write_file_atomic(a.out, batch_to_csv(out));
  std::printf("samples=%lld\nlength=%lld\nfeatures=%lld\nout=%s\n", static_cast<long long>(out.samples()),
              static_cast<long long>(out.length()), static_cast<long long>(out.features()), a.out.c_str());
}

// ---- evaluate / rp ----------------------------------------------------------

struct EvaluateArgs {
  std::string real, generated, wavelet = "db2";
  Index bins = 50, ref_cap = 200, window = 24, stride = 1;
  std::uint64_t seed = 0;
};

void run_evaluate(const EvaluateArgs& a) {
  const TimeSeriesBatch real = load_dataset(a.real, a.window, a.stride);
  const TimeSeriesBatch gen = load_dataset(a.generated, a.window, a.stride);
  DtwJsOptions opts;
  opts.bins = a.bins;
  opts.ref_cap = a.ref_cap;
  opts.seed = a.seed;
  const auto js = dtw_js_report(real, gen, opts);
  std::vector<std::string> warnings;
  const double corr = correlational_score(real, gen, &warnings);
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  WaveletConfig w;
  w.name = a.wavelet;
  const FilterBank fb = w.bank(real.length());
  const int levels = w.resolve_levels(real.length());
  const Eigen::VectorXd e_real = level_energy_profile(dwt(real, fb, levels, w.mode));
  const Eigen::VectorXd e_gen = level_energy_profile(dwt(gen, fb, levels, w.mode));

  std::printf("%-24s %14s\n", "metric", "value");
  std::printf("%-24s %14.6f\n", "dtw_js", js.value);
  std::printf("%-24s %14.6f\n", "correlational_score", corr);
  for (Index l = 0; l < e_real.size(); ++l) {
    const std::string name = l + 1 == e_real.size() ? "approx" : "level_" + std::to_string(l + 1);
    std::printf("%-24s %14.6f  (real %.6f)\n", ("energy " + name).c_str(), e_gen[l], e_real[l]);
  }
  std::printf("\n");
  std::printf("dtw_js=%s\ncorrelational_score=%s\nreference_size=%lld\nreal_samples=%lld\ngenerated_samples=%lld\n",
              fmt(js.value).c_str(), fmt(corr).c_str(), static_cast<long long>(js.reference_size),
              static_cast<long long>(real.samples()), static_cast<long long>(gen.samples()));
  for (Index l = 0; l < e_real.size(); ++l) {
    std::printf("energy_real_%lld=%s\nenergy_generated_%lld=%s\n", static_cast<long long>(l + 1),
                fmt(e_real[l]).c_str(), static_cast<long long>(l + 1), fmt(e_gen[l]).c_str());
  }
}

struct RpArgs {
  std::string a, b;
  Index pairs = 100;
  std::uint64_t seed = 0;
  int ddim_stride = 1;
};

void run_rp(const RpArgs& r) {
  const Checkpoint ca = load_checkpoint(r.a);
  const Checkpoint cb = load_checkpoint(r.b);
  const PyramidShape sa = sample_shape(ca, 1), sb = sample_shape(cb, 1);
  if (sa.level_lengths != sb.level_lengths || sa.features != sb.features || sa.source_length != sb.source_length) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoints produce different pyramid shapes");
  }
  SamplerConfig s;
  s.sampler = SamplerKind::ddim;
  s.ddim_stride = r.ddim_stride;
  const auto rep = rp_score_report(noise_to_sample(ca, s), noise_to_sample(cb, s), sa, r.pairs, r.seed);
  std::printf("rp_score=%s\nmean_random_dtw=%s\nmean_paired_dtw=%s\npairs=%lld\n", fmt(rep.score).c_str(),
              fmt(rep.mean_random_dtw).c_str(), fmt(rep.paired_dtw.mean()).c_str(), static_cast<long long>(r.pairs));
}

int run_selftest_cmd() {
  const auto rows = cli::run_selftest();
  int failed = 0;
  std::printf("%-26s %-6s %s\n", "group", "result", "detail");
  for (const auto& row : rows) {
    std::printf("%-26s %-6s %s\n", row.group.c_str(), row.passed ? "PASS" : "FAIL", row.detail.c_str());
    failed += !row.passed;
  }
  std::printf("selftest=%s\n", failed ? "FAIL" : "PASS");
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet-space diffusion for time series"};
  app.require_subcommand(1);

  DecomposeArgs dec;
  auto* c_dec = app.add_subcommand("decompose", "Multilevel DWT of a dataset into per-level CSV files");
  c_dec->add_option("--input", dec.input, "Series CSV or sample batch CSV")->required();
  c_dec->add_option("--out-dir", dec.out_dir, "Directory for level files")->required();
  c_dec->add_option("--wavelet", dec.wavelet, "Wavelet name, e.g. db2, sym4, bior2.2");
  c_dec->add_option("--levels", dec.levels, "Decomposition depth (0: automatic)");
  c_dec->add_option("--mode", dec.mode, "symmetric or periodized");
  c_dec->add_option("--window", dec.window, "Window length for raw series");
  c_dec->add_option("--stride", dec.stride, "Window stride for raw series");

  std::string rec_dir, rec_out;
  auto* c_rec = app.add_subcommand("reconstruct", "Inverse DWT of a decompose output directory");
  c_rec->add_option("--input-dir", rec_dir, "Directory written by decompose")->required();
  c_rec->add_option("--out", rec_out, "Output batch CSV")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a denoiser and write a checkpoint");
  c_train->add_option("--config", tr.config, "key = value config file");
  c_train->add_option("--data", tr.data, "Training data CSV")->required();
  c_train->add_option("--out", tr.out, "Checkpoint path")->required();
  c_train->add_option("--loss-csv", tr.loss_csv, "Loss history path (default: <out>.loss.csv)");
  c_train->add_option("--set", tr.sets, "Override a config key, e.g. --set model.heads=2");
  c_train->add_option("--epochs", tr.epochs, "Override train.epochs");
  auto* seed_opt = c_train->add_option("--seed", tr.seed, "Override train.seed");
  c_train->add_flag("--quiet", tr.quiet, "No progress lines");

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Sample from a checkpoint");
  c_gen->add_option("--checkpoint", gen.checkpoint)->required();
  c_gen->add_option("--n", gen.n, "Number of samples");
  c_gen->add_option("--seed", gen.seed, "Sampler seed");
  c_gen->add_option("--sampler", gen.sampler, "ddpm or ddim");
  c_gen->add_option("--ddim-stride", gen.ddim_stride, "Step stride for ddim");
  c_gen->add_option("--out", gen.out, "Output batch CSV")->required();

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Compare generated samples with real data");
  c_eval->add_option("--real", ev.real)->required();
  c_eval->add_option("--generated", ev.generated)->required();
  c_eval->add_option("--bins", ev.bins, "DTW-JS histogram bins");
  c_eval->add_option("--ref-cap", ev.ref_cap, "Maximum reference set size");
  c_eval->add_option("--seed", ev.seed, "Reference set seed");
  c_eval->add_option("--window", ev.window, "Window length for raw series");
  c_eval->add_option("--stride", ev.stride, "Window stride for raw series");
  c_eval->add_option("--wavelet", ev.wavelet, "Wavelet for the per-level energy table");

  RpArgs rp;
  auto* c_rp = app.add_subcommand("rp", "Reproducibility score between two checkpoints");
  c_rp->add_option("--checkpoint-a", rp.a)->required();
  c_rp->add_option("--checkpoint-b", rp.b)->required();
  c_rp->add_option("--pairs", rp.pairs, "Number of shared-noise pairs");
  c_rp->add_option("--seed", rp.seed, "Noise seed");
  c_rp->add_option("--ddim-stride", rp.ddim_stride, "Step stride for ddim");

  auto* c_self = app.add_subcommand("selftest", "Run the invariant battery");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: InvalidArguments: %s\n", e.what());
    return 2;
  }

  try {
    if (c_dec->parsed()) run_decompose(dec);
    if (c_rec->parsed()) run_reconstruct(rec_dir, rec_out);
    if (c_train->parsed()) {
      tr.seed_given = seed_opt->count() > 0;
      run_train(tr);
    }
    if (c_gen->parsed()) run_generate(gen);
    if (c_eval->parsed()) run_evaluate(ev);
    if (c_rp->parsed()) run_rp(rp);
    if (c_self->parsed()) return run_selftest_cmd();
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(code_name(e.code())).c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: Internal: %s\n", e.what());
    return 3;
  }
  return 0;
}
