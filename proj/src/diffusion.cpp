#include "wdiff/diffusion.hpp"

#include <cmath>
#include <numbers>

namespace wdiff {

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "exponential") return ScheduleKind::exponential;
  if (s == "cosine") return ScheduleKind::cosine;
  throw Error(ErrorCode::InvalidConfig, "unknown schedule kind '" + s + "'");
}

SamplerKind parse_sampler_kind(const std::string& s) {
  if (s == "ddpm") return SamplerKind::ddpm;
  if (s == "ddim") return SamplerKind::ddim;
  throw Error(ErrorCode::InvalidConfig, "unknown sampler '" + s + "'");
}

PredictionTarget parse_prediction_target(const std::string& s) {
  if (s == "noise") return PredictionTarget::noise;
  if (s == "coefficients") return PredictionTarget::coefficients;
  throw Error(ErrorCode::InvalidConfig, "unknown prediction target '" + s + "'");
}

std::string to_string(ScheduleKind k) { return k == ScheduleKind::exponential ? "exponential" : "cosine"; }
std::string to_string(SamplerKind k) { return k == SamplerKind::ddpm ? "ddpm" : "ddim"; }
std::string to_string(PredictionTarget p) { return p == PredictionTarget::noise ? "noise" : "coefficients"; }

namespace {

void finish_tables(NoiseSchedule& s) {
  s.alphas = 1.0 - s.betas.array();
  s.alpha_bars.resize(s.betas.size());
  double running = 1.0;
  for (Eigen::Index i = 0; i < s.betas.size(); ++i) {
    running *= s.alphas[i];
    s.alpha_bars[i] = running;
  }
}

}  // namespace

NoiseSchedule make_exponential_schedule(int steps, double beta_start, double beta_end, double gamma) {
  if (steps < 2 || !(beta_start > 0.0) || !(beta_start < beta_end) || !(beta_end < 1.0) || !(gamma > 0.0)) {
    throw Error(ErrorCode::InvalidSchedule, "exponential schedule needs steps >= 2, 0 < beta_start < beta_end < 1, "
                                            "gamma > 0");
  }
  NoiseSchedule s;
  s.kind = ScheduleKind::exponential;
  s.betas.resize(steps);
  for (int i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    s.betas[i] = beta_start + (beta_end - beta_start) * (1.0 - std::exp(-gamma * t));
  }
  finish_tables(s);
  return s;
}

NoiseSchedule make_cosine_schedule(int steps, double offset) {
  if (steps < 2 || !(offset > 0.0)) throw Error(ErrorCode::InvalidSchedule, "cosine schedule needs steps >= 2, s > 0");
  const auto f = [&](double t) {
    const double c = std::cos((t / steps + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
    return c * c;
  };
  NoiseSchedule s;
  s.kind = ScheduleKind::cosine;
  s.betas.resize(steps);
  for (int i = 0; i < steps; ++i) s.betas[i] = std::min(1.0 - f(i + 1) / f(i), 0.999);
  finish_tables(s);
  return s;
}

NoiseSchedule ScheduleConfig::build() const {
  return kind == ScheduleKind::exponential ? make_exponential_schedule(steps, beta_start, beta_end, gamma)
                                           : make_cosine_schedule(steps, cosine_offset);
}

PyramidShape shape_of(const Pyramid& p) {
  return PyramidShape{p.samples(), p.features(), p.source_length, p.level_lengths, p.mode};
}

Pyramid zeros(const PyramidShape& shape) {
  Pyramid p;
  p.level_lengths = shape.level_lengths;
  p.source_length = shape.source_length;
  p.mode = shape.mode;
  for (std::size_t l = 0; l < shape.level_count(); ++l) {
    p.levels.emplace_back(shape.samples, shape.level_length(l), shape.features);
  }
  return p;
}

void fill_normal(Pyramid& p, NoiseStream& stream) {
  for (auto& level : p.levels) {
    auto& flat = level.flat();
    for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = stream.normal();
  }
}

Pyramid normal_pyramid(const PyramidShape& shape, NoiseStream& stream) {
  Pyramid p = zeros(shape);
  fill_normal(p, stream);
  return p;
}

Pyramid forward_diffuse(const Pyramid& clean, int t, const Pyramid& noise, const NoiseSchedule& sched) {
  require_same_structure(clean, noise, "forward_diffuse");
  const double ab = sched.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  Pyramid out = clean;
  for (std::size_t l = 0; l < out.levels.size(); ++l) {
    out.levels[l].flat() = a * clean.levels[l].flat() + b * noise.levels[l].flat();
  }
  return out;
}

Pyramid implied_noise(const Pyramid& noisy, const Pyramid& clean_hat, int t, const NoiseSchedule& sched) {
  require_same_structure(noisy, clean_hat, "implied_noise");
  const double ab = sched.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  Pyramid out = noisy;
  for (std::size_t l = 0; l < out.levels.size(); ++l) {
    out.levels[l].flat() = (noisy.levels[l].flat() - a * clean_hat.levels[l].flat()) / b;
  }
  return out;
}

Pyramid implied_clean(const Pyramid& noisy, const Pyramid& eps_hat, int t, const NoiseSchedule& sched) {
  require_same_structure(noisy, eps_hat, "implied_clean");
  const double ab = sched.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  Pyramid out = noisy;
  for (std::size_t l = 0; l < out.levels.size(); ++l) {
    out.levels[l].flat() = (noisy.levels[l].flat() - b * eps_hat.levels[l].flat()) / a;
  }
  return out;
}

Pyramid ddpm_reverse_step(const Pyramid& noisy, const Pyramid& prediction, int t, const NoiseSchedule& sched,
                          const Pyramid& z, PredictionTarget target) {
  require_same_structure(noisy, prediction, "ddpm_reverse_step");
  require_same_structure(noisy, z, "ddpm_reverse_step");
  const Pyramid eps = target == PredictionTarget::noise ? prediction : implied_noise(noisy, prediction, t, sched);
  const double beta = sched.betas[t];
  const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alphas[t]);
  const double eps_coef = beta / std::sqrt(1.0 - sched.alpha_bars[t]);
  const double sigma = std::sqrt(beta);
  Pyramid out = noisy;
  for (std::size_t l = 0; l < out.levels.size(); ++l) {
    out.levels[l].flat() = inv_sqrt_alpha * (noisy.levels[l].flat() - eps_coef * eps.levels[l].flat()) +
                           sigma * z.levels[l].flat();
  }
  return out;
}

Pyramid ddim_reverse_step(const Pyramid& noisy, const Pyramid& prediction, int t, int t_prev,
                          const NoiseSchedule& sched, PredictionTarget target) {
  require_same_structure(noisy, prediction, "ddim_reverse_step");
  if (t_prev == t) return noisy;
  Pyramid eps, clean;
  if (target == PredictionTarget::noise) {
    eps = prediction;
    clean = implied_clean(noisy, prediction, t, sched);
  } else {
    clean = prediction;
    eps = implied_noise(noisy, prediction, t, sched);
  }
  return forward_diffuse(clean, t_prev, eps, sched);
}

std::vector<int> ddim_timesteps(int steps, int stride) {
  stride = std::max(stride, 1);
  std::vector<int> ts;
  for (int t = steps - 1; t >= 0; t -= stride) ts.push_back(t);
  return ts;
}

Pyramid sample(const DenoiseFn& denoiser, const PyramidShape& shape, const NoiseSchedule& sched,
               const SamplerConfig& cfg) {
  NoiseStream stream(cfg.seed);
  return sample_from(denoiser, normal_pyramid(shape, stream), sched, cfg);
}

Pyramid sample_from(const DenoiseFn& denoiser, Pyramid x, const NoiseSchedule& sched, const SamplerConfig& cfg) {
  if (cfg.sampler == SamplerKind::ddim) {
    const auto ts = ddim_timesteps(sched.steps(), cfg.ddim_stride);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const int t = ts[i];
      const int t_prev = i + 1 < ts.size() ? ts[i + 1] : -1;
      x = ddim_reverse_step(x, denoiser(x, t), t, t_prev, sched, cfg.prediction_target);
    }
    return x;
  }
  // Per-step noise comes from a stream derived from the seed, independent of
  // the one that produced the starting pyramid.
  NoiseStream step_noise(derive_seed(cfg.seed, 1));
  const PyramidShape shape = shape_of(x);
  for (int t = sched.steps() - 1; t >= 0; --t) {
    Pyramid z = zeros(shape);
    if (t > 0) fill_normal(z, step_noise);
    x = ddpm_reverse_step(x, denoiser(x, t), t, sched, z, cfg.prediction_target);
  }
  return x;
}

}  // namespace wdiff
