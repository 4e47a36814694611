#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wdiff/rng.hpp"
#include "wdiff/transform.hpp"

namespace wdiff {

enum class ScheduleKind { exponential, cosine };
enum class SamplerKind { ddpm, ddim };
enum class PredictionTarget { noise, coefficients };

ScheduleKind parse_schedule_kind(const std::string& s);
SamplerKind parse_sampler_kind(const std::string& s);
PredictionTarget parse_prediction_target(const std::string& s);
std::string to_string(ScheduleKind k);
std::string to_string(SamplerKind k);
std::string to_string(PredictionTarget p);

struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::exponential;
  Eigen::VectorXd betas;
  Eigen::VectorXd alphas;      // 1 - beta
  Eigen::VectorXd alpha_bars;  // running product of alphas

  int steps() const { return static_cast<int>(betas.size()); }
  // alpha_bar at step t; t = -1 denotes the clean data (alpha_bar = 1).
  double alpha_bar(int t) const { return t < 0 ? 1.0 : alpha_bars[t]; }
};

// beta_i = beta_start + (beta_end - beta_start) * (1 - exp(-gamma * i / (T - 1))).
NoiseSchedule make_exponential_schedule(int steps, double beta_start = 1e-4, double beta_end = 0.02,
                                        double gamma = 2.0);
// alpha_bar(t) proportional to cos^2(((t/T + s) / (1 + s)) * pi/2), betas clipped at 0.999.
NoiseSchedule make_cosine_schedule(int steps, double s = 0.008);

struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::exponential;
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double gamma = 2.0;
  double cosine_offset = 0.008;

  NoiseSchedule build() const;
};

struct SamplerConfig {
  SamplerKind sampler = SamplerKind::ddpm;
  PredictionTarget prediction_target = PredictionTarget::noise;
  std::uint64_t seed = 0;
  int ddim_stride = 1;
};

// Everything needed to allocate a pyramid without data.
struct PyramidShape {
  Eigen::Index samples = 1;
  Eigen::Index features = 1;
  Eigen::Index source_length = 2;
  std::vector<Eigen::Index> level_lengths;
  BoundaryMode mode = BoundaryMode::symmetric;

  std::size_t level_count() const { return level_lengths.size() + 1; }
  Eigen::Index level_length(std::size_t l) const {
    return level_lengths[std::min(l, level_lengths.size() - 1)];
  }
};

PyramidShape shape_of(const Pyramid& p);
Pyramid zeros(const PyramidShape& shape);

// Standard normals written level by level, each level in (sample, time,
// feature) order. This layout is part of the reproducibility contract.
void fill_normal(Pyramid& p, NoiseStream& stream);
Pyramid normal_pyramid(const PyramidShape& shape, NoiseStream& stream);

// sqrt(alpha_bar_t) * C_0 + sqrt(1 - alpha_bar_t) * eps on every level.
Pyramid forward_diffuse(const Pyramid& clean, int t, const Pyramid& noise, const NoiseSchedule& sched);

// Conversions between the two prediction targets at step t.
Pyramid implied_noise(const Pyramid& noisy, const Pyramid& clean_hat, int t, const NoiseSchedule& sched);
Pyramid implied_clean(const Pyramid& noisy, const Pyramid& eps_hat, int t, const NoiseSchedule& sched);

// (1/sqrt(alpha_t)) (x_t - beta_t / sqrt(1 - alpha_bar_t) eps_hat) + sqrt(beta_t) z.
// `prediction` is a noise estimate, or a clean estimate when target is
// coefficients.
Pyramid ddpm_reverse_step(const Pyramid& noisy, const Pyramid& prediction, int t, const NoiseSchedule& sched,
                          const Pyramid& z, PredictionTarget target = PredictionTarget::noise);

// Deterministic (eta = 0) update from t to t_prev < t; t_prev = -1 returns
// the clean estimate.
Pyramid ddim_reverse_step(const Pyramid& noisy, const Pyramid& prediction, int t, int t_prev,
                          const NoiseSchedule& sched, PredictionTarget target = PredictionTarget::noise);

using DenoiseFn = std::function<Pyramid(const Pyramid& noisy, int t)>;

// Decreasing step sequence visited by the DDIM sampler.
std::vector<int> ddim_timesteps(int steps, int stride);

// Runs the reverse process from seeded Gaussian noise down to step 0.
Pyramid sample(const DenoiseFn& denoiser, const PyramidShape& shape, const NoiseSchedule& sched,
               const SamplerConfig& cfg);
// Same, starting from a caller-supplied initial noise pyramid.
Pyramid sample_from(const DenoiseFn& denoiser, Pyramid initial, const NoiseSchedule& sched,
                    const SamplerConfig& cfg);

}  // namespace wdiff
