#include "wdiff/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

#include "wdiff/error.hpp"

namespace wdiff {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::InvalidConfig, "bad value '" + value + "' for " + key);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  bad_value(key, value);
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  if (value.empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) bad_value(key, value);
    out.push_back(parse_number<double>(key, item.substr(b, e - b + 1)));
  }
  return out;
}

std::string list_text(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

template <typename E, typename Parse>
E parse_enum(const std::string& key, const std::string& value, Parse parse) {
  try {
    return parse(value);
  } catch (const Error&) {
    bad_value(key, value);
  }
}

struct Field {
  const char* key;
  bool model;  // part of the checkpoint digest
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define WDIFF_INT(KEY, MEMBER, MODEL)                                                        \
  Field{KEY, MODEL, [](const RunConfig& c) { return std::to_string(c.MEMBER); },             \
        [](RunConfig& c, const std::string& k, const std::string& v) {                       \
          c.MEMBER = parse_number<decltype(c.MEMBER)>(k, v);                                 \
        }}
#define WDIFF_REAL(KEY, MEMBER, MODEL)                                                                   \
  Field{KEY, MODEL, [](const RunConfig& c) { return fmt(c.MEMBER); },                                    \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.MEMBER = parse_number<double>(k, v); }}
#define WDIFF_BOOL(KEY, MEMBER, MODEL)                                                                  \
  Field{KEY, MODEL, [](const RunConfig& c) { return std::string(c.MEMBER ? "true" : "false"); },        \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.MEMBER = parse_bool(k, v); }}
#define WDIFF_ENUM(KEY, MEMBER, PARSE, MODEL)                                                              \
  Field{KEY, MODEL, [](const RunConfig& c) { return to_string(c.MEMBER); },                               \
        [](RunConfig& c, const std::string& k, const std::string& v) {                                    \
          c.MEMBER = parse_enum<decltype(c.MEMBER)>(k, v, PARSE);                                          \
        }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      WDIFF_INT("model.embed_dim", model.embed_dim, true),
      WDIFF_INT("model.approx_embed_dim", model.approx_embed_dim, true),
      WDIFF_INT("model.heads", model.heads, true),
      WDIFF_INT("model.layers_detail", model.layers_detail, true),
      WDIFF_INT("model.layers_approx", model.layers_approx, true),
      WDIFF_INT("model.time_embed_dim", model.time_embed_dim, true),
      WDIFF_REAL("model.dropout", model.dropout, true),
      WDIFF_BOOL("model.cross_attention", model.cross_attention, true),
      WDIFF_ENUM("model.prediction_target", model.prediction_target, parse_prediction_target, true),
      WDIFF_BOOL("model.positional_encoding", model.positional_encoding, true),

      WDIFF_INT("train.epochs", train.epochs, false),
      WDIFF_INT("train.batch_size", train.batch_size, false),
      Field{"train.level_weights", false, [](const RunConfig& c) { return list_text(c.train.level_weights); },
            [](RunConfig& c, const std::string& k, const std::string& v) { c.train.level_weights = parse_list(k, v); }},
      WDIFF_REAL("train.approx_weight", train.approx_weight, false),
      WDIFF_REAL("train.lambda_energy", train.lambda_energy, false),
      WDIFF_REAL("train.lr_base", train.lr_base, false),
      WDIFF_REAL("train.lr_max", train.lr_max, false),
      WDIFF_REAL("train.lr_final", train.lr_final, false),
      WDIFF_REAL("train.warmup_fraction", train.warmup_fraction, false),
      WDIFF_REAL("train.weight_decay", train.weight_decay, false),
      WDIFF_REAL("train.adam_beta1", train.adam_beta1, false),
      WDIFF_REAL("train.adam_beta2", train.adam_beta2, false),
      WDIFF_REAL("train.adam_eps", train.adam_eps, false),
      WDIFF_INT("train.seed", train.seed, false),

      Field{"wavelet.name", true, [](const RunConfig& c) { return c.wavelet.name; },
            [](RunConfig& c, const std::string&, const std::string& v) { c.wavelet.name = v; }},
      WDIFF_INT("wavelet.levels", wavelet.levels, true),
      WDIFF_ENUM("wavelet.mode", wavelet.mode, parse_boundary_mode, true),

      WDIFF_ENUM("schedule.kind", schedule.kind, parse_schedule_kind, true),
      WDIFF_INT("schedule.steps", schedule.steps, true),
      WDIFF_REAL("schedule.beta_start", schedule.beta_start, true),
      WDIFF_REAL("schedule.beta_end", schedule.beta_end, true),
      WDIFF_REAL("schedule.gamma", schedule.gamma, true),
      WDIFF_REAL("schedule.cosine_s", schedule.cosine_offset, true),

      WDIFF_INT("data.window", data.window, false),
      WDIFF_INT("data.stride", data.stride, false),
      WDIFF_ENUM("data.normalization", data.normalization, parse_normalization, false),

      WDIFF_ENUM("sampler.kind", sampler.sampler, parse_sampler_kind, false),
      WDIFF_INT("sampler.seed", sampler.seed, false),
      WDIFF_INT("sampler.ddim_stride", sampler.ddim_stride, false),
  };
  return table;
}

#undef WDIFF_INT
#undef WDIFF_REAL
#undef WDIFF_BOOL
#undef WDIFF_ENUM

std::string render(const RunConfig& cfg, bool model_only) {
  std::string out;
  for (const auto& f : fields()) {
    if (model_only && !f.model) continue;
    out += f.key;
    out += " = ";
    out += f.get(cfg);
    out += '\n';
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (data.window < 2 || data.stride < 1) throw Error(ErrorCode::InvalidConfig, "data: window >= 2 and stride >= 1");
  if (schedule.steps < 1) throw Error(ErrorCode::InvalidConfig, "schedule: steps must be positive");
  if (sampler.ddim_stride < 1) throw Error(ErrorCode::InvalidConfig, "sampler: ddim_stride must be positive");
  if (wavelet.levels < 0) throw Error(ErrorCode::InvalidConfig, "wavelet: levels must be >= 0");
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, key, value);
      cfg.sampler.prediction_target = cfg.model.prediction_target;
      return;
    }
  }
  throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ParseError, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    auto strip = [](std::string s) {
      const auto lo = s.find_first_not_of(" \t\r");
      if (lo == std::string::npos) return std::string();
      return s.substr(lo, s.find_last_not_of(" \t\r") - lo + 1);
    };
    apply_setting(base, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
  base.sampler.prediction_target = base.model.prediction_target;
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) { return parse_config(read_file(path), std::move(base)); }

std::string to_text(const RunConfig& cfg) { return render(cfg, false); }

std::string model_text(const RunConfig& cfg) { return render(cfg, true); }

std::map<std::string, std::string> config_entries(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out.emplace(f.key, f.get(cfg));
  return out;
}

}  // namespace wdiff
