#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "wdiff/config.hpp"
#include "wdiff/data.hpp"
#include "wdiff/denoiser.hpp"
#include "wdiff/training.hpp"

namespace wdiff {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  DenoiserParams params;
  AdamState optimizer;
  NormalizationRecord normalization;
};

// Layout: "WDIF", u32 version, u64 digest of model_text(config), u64 length +
// full config text, u64 record count, then records of (u32 name length, name,
// u32 rank, u64 dims..., little-endian f64 data). All integers little-endian.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes, const std::string& source = "<memory>");

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::uint64_t config_digest(const RunConfig& cfg);

}  // namespace wdiff
