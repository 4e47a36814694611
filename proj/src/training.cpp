#include "wdiff/training.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

namespace wdiff {

using ad::Graph;
using ad::Var;
using Eigen::Index;

void TrainConfig::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "train: " + what); };
  if (epochs <= 0 || batch_size <= 0) fail("epochs and batch_size must be positive");
  if (!(lr_base > 0.0 && lr_max > 0.0 && lr_final > 0.0)) fail("learning rates must be positive");
  if (!(lr_base < lr_max)) fail("lr_base must be below lr_max");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) fail("warmup_fraction must be in (0, 1)");
  if (!(lambda_energy >= 0.0)) fail("lambda_energy must be non-negative");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  for (const double w : level_weights) {
    if (!(w > 0.0)) fail("level weights must be positive");
  }
}

std::vector<double> TrainConfig::weights_for(std::size_t level_count) const {
  if (!level_weights.empty()) {
    if (level_weights.size() != level_count) {
      throw Error(ErrorCode::InvalidConfig, "train: " + std::to_string(level_weights.size()) +
                                                " level weights for " + std::to_string(level_count) + " levels");
    }
    return level_weights;
  }
  std::vector<double> w(level_count, 1.0);
  w.back() = approx_weight;
  return w;
}

double recon_loss(const Pyramid& eps_true, const Pyramid& eps_pred, const std::vector<double>& weights) {
  require_same_structure(eps_true, eps_pred, "recon_loss");
  if (weights.size() != eps_true.levels.size()) throw Error(ErrorCode::ShapeMismatch, "recon_loss: weight count");
  double loss = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto& a = eps_true.levels[l].flat();
    loss += weights[l] * (a - eps_pred.levels[l].flat()).squaredNorm() / static_cast<double>(a.size());
  }
  return loss;
}

double energy_loss(const Pyramid& c0_true, const Pyramid& c0_pred) {
  require_same_structure(c0_true, c0_pred, "energy_loss");
  double loss = 0.0;
  for (std::size_t l = 0; l < c0_true.levels.size(); ++l) {
    const auto& a = c0_true.levels[l].flat();
    loss += std::abs(a.squaredNorm() - c0_pred.levels[l].flat().squaredNorm()) / static_cast<double>(a.size());
  }
  return loss;
}

double total_loss(const Pyramid& eps_true, const Pyramid& eps_pred, const Pyramid& c0_true, const Pyramid& c0_implied,
                  const TrainConfig& cfg) {
  const double recon = recon_loss(eps_true, eps_pred, cfg.weights_for(eps_true.levels.size()));
  if (cfg.lambda_energy == 0.0) return recon;
  return recon + cfg.lambda_energy * energy_loss(c0_true, c0_implied);
}

double lr_at_epoch(double epoch, const TrainConfig& cfg) {
  const double total = cfg.epochs;
  const double knee = cfg.warmup_fraction * total;
  if (epoch <= knee) return cfg.lr_base + (cfg.lr_max - cfg.lr_base) * epoch / knee;
  const double progress = (epoch - knee) / ((1.0 - cfg.warmup_fraction) * total);
  return cfg.lr_final + (cfg.lr_max - cfg.lr_final) * (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
}

void adamw_step(DenoiserParams& params, const std::map<std::string, Eigen::VectorXd>& grads, AdamState& state,
                double lr, const TrainConfig& cfg) {
  for (const auto& [name, g] : grads) {
    const auto it = params.tensors.find(name);
    if (it == params.tensors.end() || it->second.size() != g.size()) {
      throw Error(ErrorCode::ShapeMismatch, "adamw_step: gradient '" + name + "' does not match a parameter");
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  for (auto& [name, tensor] : params.tensors) {
    auto& p = tensor.data;
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != p.size()) m = Eigen::VectorXd::Zero(p.size());
    if (v.size() != p.size()) v = Eigen::VectorXd::Zero(p.size());
    p *= 1.0 - lr * cfg.weight_decay;
    const auto git = grads.find(name);
    if (git != grads.end()) {
      m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * git->second;
      v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * git->second.cwiseAbs2();
    } else {
      m *= cfg.adam_beta1;
      v *= cfg.adam_beta2;
    }
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
  }
}

namespace {

// Rows `idx` of every level of `full`.
Pyramid gather(const Pyramid& full, const std::vector<Index>& idx) {
  Pyramid out;
  out.level_lengths = full.level_lengths;
  out.source_length = full.source_length;
  out.mode = full.mode;
  for (const auto& level : full.levels) {
    Array3<double> part(static_cast<Index>(idx.size()), level.length(), level.features());
    const Index block = level.length() * level.features();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      part.flat().segment(static_cast<Index>(i) * block, block) = level.flat().segment(idx[i] * block, block);
    }
    out.levels.push_back(std::move(part));
  }
  return out;
}

// Per-sample coefficient tensor of shape (N, 1, 1).
Var per_sample(Graph& g, const Eigen::VectorXd& v) { return g.constant({v.size(), 1, 1}, v, "per_sample"); }

Var level_constant(Graph& g, const Array3<double>& a, const char* name) {
  return g.constant({a.samples(), a.length(), a.features()}, a.flat(), name);
}

}  // namespace

TrainResult train(const TimeSeriesBatch& data, const DenoiserConfig& model, const TrainConfig& cfg,
                  const WaveletConfig& wavelet, const ScheduleConfig& schedule, const TrainObserver& observer) {
  model.validate();
  cfg.validate();
  if (data.samples() == 0 || data.length() == 0 || data.features() == 0) {
    throw Error(ErrorCode::EmptyData, "training data is empty");
  }
  const FilterBank fb = wavelet.bank(data.length());
  const Pyramid clean = dwt(data, fb, wavelet.resolve_levels(data.length()), wavelet.mode);
  const NoiseSchedule sched = schedule.build();
  const std::vector<double> weights = cfg.weights_for(clean.levels.size());

  TrainResult res;
  res.params = init_denoiser(model, layout_of(clean), derive_seed(cfg.seed, 1));
  NoiseStream rng(derive_seed(cfg.seed, 2));

  const Index n_total = data.samples();
  const Index batch = std::min<Index>(cfg.batch_size, n_total);
  const Index batches = (n_total + batch - 1) / batch;
  std::vector<Index> order(static_cast<std::size_t>(n_total));
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Index{0});
    for (Index i = n_total - 1; i > 0; --i) {
      std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    }
    for (Index b = 0; b < batches; ++b) {
      const Index lo = b * batch;
      const Index hi = std::min(n_total, lo + batch);
      const std::vector<Index> idx(order.begin() + lo, order.begin() + hi);
      const Index n = hi - lo;
      const Pyramid c0 = gather(clean, idx);

      std::vector<int> t(static_cast<std::size_t>(n));
      Eigen::VectorXd sig(n), noise_sd(n);
      for (Index i = 0; i < n; ++i) {
        t[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.steps())));
        sig[i] = std::sqrt(sched.alpha_bars[t[i]]);
        noise_sd[i] = std::sqrt(1.0 - sched.alpha_bars[t[i]]);
      }
      Pyramid eps = zeros_like(c0);
      fill_normal(eps, rng);
      Pyramid xt = c0;
      for (std::size_t l = 0; l < xt.levels.size(); ++l) {
        auto& lv = xt.levels[l];
        const Index block = lv.length() * lv.features();
        for (Index i = 0; i < n; ++i) {
          lv.flat().segment(i * block, block) =
              sig[i] * c0.levels[l].flat().segment(i * block, block) + noise_sd[i] * eps.levels[l].flat().segment(i * block, block);
        }
      }

      Graph g(true, derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(step)));
      ParamBinder binder(g, res.params, true);
      const std::vector<Var> out = denoiser_graph(binder, xt, t, model);
      const bool predict_noise = model.prediction_target == PredictionTarget::noise;

      Var recon = g.scalar(0.0);
      for (std::size_t l = 0; l < out.size(); ++l) {
        const Var target = level_constant(g, predict_noise ? eps.levels[l] : c0.levels[l], "target");
        recon = g.add(recon, g.scale(g.mean(g.square(g.sub(out[l], target))), weights[l]));
      }
      Var total = recon;
      double energy_value = 0.0;
      if (cfg.lambda_energy > 0.0) {
        Var energy = g.scalar(0.0);
        const Var inv_sig = per_sample(g, sig.cwiseInverse());
        const Var ratio = per_sample(g, -noise_sd.cwiseQuotient(sig));
        for (std::size_t l = 0; l < out.size(); ++l) {
          Var c0_hat = out[l];
          if (predict_noise) {
            // C0_hat = (x_t - sqrt(1 - alpha_bar) eps_hat) / sqrt(alpha_bar)
            c0_hat = g.add(g.mul(level_constant(g, xt.levels[l], "x_t"), inv_sig), g.mul(out[l], ratio));
          }
          const double e_true = c0.levels[l].flat().squaredNorm() / static_cast<double>(c0.levels[l].size());
          energy = g.add(energy, g.abs(g.add_scalar(g.mean(g.square(c0_hat)), -e_true)));
        }
        energy_value = energy.value()[0];
        total = g.add(recon, g.scale(energy, cfg.lambda_energy));
      }

      LossRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.lr = lr_at_epoch(epoch + static_cast<double>(b) / static_cast<double>(batches), cfg);
      rec.recon = recon.value()[0];
      rec.energy = energy_value;
      rec.total = total.value()[0];
      if (!std::isfinite(rec.total)) {
        throw Error(ErrorCode::NonFiniteLoss, "non-finite loss at step " + std::to_string(step));
      }
      g.backward(total);
      std::map<std::string, Eigen::VectorXd> grads;
      for (const auto& [name, var] : binder.bound()) grads.emplace(name, g.grad(var));
      adamw_step(res.params, grads, res.optimizer, rec.lr, cfg);

      res.history.push_back(rec);
      if (observer) observer(rec);
      ++step;
    }
  }
  return res;
}

std::string loss_history_csv(const std::vector<LossRecord>& history) {
  std::string out = "step,epoch,lr,recon,energy,total\n";
  char buf[192];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g\n", r.step, r.epoch, r.lr, r.recon, r.energy,
                  r.total);
    out += buf;
  }
  return out;
}

}  // namespace wdiff
