#pragma once

#include <map>
#include <string>
#include <string_view>

#include "wdiff/data.hpp"
#include "wdiff/denoiser.hpp"
#include "wdiff/diffusion.hpp"
#include "wdiff/training.hpp"
#include "wdiff/transform.hpp"

namespace wdiff {

struct DataConfig {
  Eigen::Index window = 24;
  Eigen::Index stride = 1;
  Normalization normalization = Normalization::minmax;
};

struct RunConfig {
  DenoiserConfig model;
  TrainConfig train;
  WaveletConfig wavelet;
  ScheduleConfig schedule;
  DataConfig data;
  SamplerConfig sampler;

  void validate() const;
};

// Sets one dotted key ("model.heads", "train.level_weights", ...). Throws
// InvalidConfig for unknown keys or unparsable values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Flat "key = value" lines; '#' starts a comment. Settings apply on top of `base`.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

// Every key, one per line, in a fixed order; parse_config(to_text(c)) == c.
std::string to_text(const RunConfig& cfg);
// Only the keys that determine the model, wavelet and schedule.
std::string model_text(const RunConfig& cfg);

std::map<std::string, std::string> config_entries(const RunConfig& cfg);

}  // namespace wdiff
