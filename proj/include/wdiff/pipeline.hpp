#pragma once

#include <vector>

#include "wdiff/checkpoint.hpp"
#include "wdiff/metrics.hpp"

namespace wdiff {

struct TrainedModel {
  Checkpoint checkpoint;
  std::vector<LossRecord> history;
};

// Normalizes `raw` with cfg.data.normalization, trains, and packages the
// result. The window length recorded in the checkpoint is raw.length().
TrainedModel train_model(const TimeSeriesBatch& raw, RunConfig cfg, const TrainObserver& observer = {});

// Untrained parameters for the same layout and seed protocol as train_model.
Checkpoint untrained_checkpoint(const TimeSeriesBatch& raw, RunConfig cfg);

PyramidShape sample_shape(const Checkpoint& ckpt, Eigen::Index n);

// idwt followed by denormalization.
TimeSeriesBatch decode(const Checkpoint& ckpt, const Pyramid& coeffs);

// Denoiser that evaluates fixed-size chunks of the batch in turn.
DenoiseFn chunked_denoiser(const Checkpoint& ckpt, Eigen::Index chunk = 128);

// n samples in data units, seeded by sampler.seed.
TimeSeriesBatch generate(const Checkpoint& ckpt, Eigen::Index n, const SamplerConfig& sampler);

// Deterministic map from initial noise to data-unit samples, for rp_score.
// Keeps a reference to `ckpt`.
NoiseToSample noise_to_sample(const Checkpoint& ckpt, SamplerConfig sampler);

}  // namespace wdiff
