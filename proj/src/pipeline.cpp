#include "wdiff/pipeline.hpp"

namespace wdiff {

using Eigen::Index;

namespace {

Pyramid slice_samples(const Pyramid& p, Index start, Index count) {
  Pyramid out;
  out.level_lengths = p.level_lengths;
  out.source_length = p.source_length;
  out.mode = p.mode;
  for (const auto& lv : p.levels) {
    Array3<double> part(count, lv.length(), lv.features());
    const Index block = lv.length() * lv.features();
    part.flat() = lv.flat().segment(start * block, count * block);
    out.levels.push_back(std::move(part));
  }
  return out;
}

Checkpoint package(RunConfig cfg, DenoiserParams params, AdamState opt, NormalizationRecord norm) {
  Checkpoint ck;
  cfg.sampler.prediction_target = cfg.model.prediction_target;
  ck.config = std::move(cfg);
  ck.params = std::move(params);
  ck.optimizer = std::move(opt);
  ck.normalization = std::move(norm);
  return ck;
}

}  // namespace

TrainedModel train_model(const TimeSeriesBatch& raw, RunConfig cfg, const TrainObserver& observer) {
  cfg.data.window = raw.length();
  cfg.validate();
  const Normalized norm = normalize(raw, cfg.data.normalization);
  TrainResult res = train(norm.batch, cfg.model, cfg.train, cfg.wavelet, cfg.schedule, observer);
  TrainedModel out;
  out.history = std::move(res.history);
  out.checkpoint = package(std::move(cfg), std::move(res.params), std::move(res.optimizer), norm.record);
  return out;
}

Checkpoint untrained_checkpoint(const TimeSeriesBatch& raw, RunConfig cfg) {
  cfg.data.window = raw.length();
  cfg.validate();
  const Normalized norm = normalize(raw, cfg.data.normalization);
  const Index T = raw.length();
  const PyramidShape probe{1, raw.features(), T,
                           level_lengths(T, cfg.wavelet.bank(T).length(), cfg.wavelet.resolve_levels(T), cfg.wavelet.mode),
                           cfg.wavelet.mode};
  const ModelLayout layout = layout_of(zeros(probe));
  DenoiserParams params = init_denoiser(cfg.model, layout, derive_seed(cfg.train.seed, 1));
  return package(std::move(cfg), std::move(params), AdamState{}, norm.record);
}

PyramidShape sample_shape(const Checkpoint& ckpt, Index n) {
  const auto& cfg = ckpt.config;
  const auto& tokens = ckpt.params.layout.tokens;
  const Index T = cfg.data.window;
  PyramidShape s;
  s.samples = n;
  s.features = ckpt.params.layout.features;
  s.source_length = T;
  s.mode = cfg.wavelet.mode;
  s.level_lengths.assign(tokens.begin(), tokens.end() - 1);
  const auto expect = level_lengths(T, cfg.wavelet.bank(T).length(), static_cast<int>(s.level_lengths.size()), s.mode);
  if (tokens.size() < 2 || expect != s.level_lengths) {
    throw Error(ErrorCode::CheckpointError, "checkpoint layout does not match its wavelet configuration");
  }
  return s;
}

TimeSeriesBatch decode(const Checkpoint& ckpt, const Pyramid& coeffs) {
  const auto& w = ckpt.config.wavelet;
  return denormalize(idwt(coeffs, w.bank(coeffs.source_length)), ckpt.normalization);
}

DenoiseFn chunked_denoiser(const Checkpoint& ckpt, Index chunk) {
  return [&ckpt, chunk](const Pyramid& noisy, int t) {
    const Index n = noisy.samples();
    if (n <= chunk) return denoise_forward(noisy, t, ckpt.params, ckpt.config.model);
    Pyramid out = noisy;
    for (Index start = 0; start < n; start += chunk) {
      const Index count = std::min(chunk, n - start);
      const Pyramid part = denoise_forward(slice_samples(noisy, start, count), t, ckpt.params, ckpt.config.model);
      for (std::size_t l = 0; l < out.levels.size(); ++l) {
        const Index block = out.levels[l].length() * out.levels[l].features();
        out.levels[l].flat().segment(start * block, count * block) = part.levels[l].flat();
      }
    }
    return out;
  };
}

TimeSeriesBatch generate(const Checkpoint& ckpt, Index n, const SamplerConfig& sampler) {
  if (n < 1) throw Error(ErrorCode::InvalidConfig, "sample count must be positive");
  SamplerConfig s = sampler;
  s.prediction_target = ckpt.config.model.prediction_target;
  const Pyramid coeffs = sample(chunked_denoiser(ckpt), sample_shape(ckpt, n), ckpt.config.schedule.build(), s);
  return decode(ckpt, coeffs);
}

NoiseToSample noise_to_sample(const Checkpoint& ckpt, SamplerConfig sampler) {
  sampler.prediction_target = ckpt.config.model.prediction_target;
  return [&ckpt, sampler](const Pyramid& noise) {
    return decode(ckpt, sample_from(chunked_denoiser(ckpt), noise, ckpt.config.schedule.build(), sampler));
  };
}

}  // namespace wdiff
