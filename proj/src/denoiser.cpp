#include "wdiff/denoiser.hpp"

#include <cmath>

namespace wdiff {

using ad::Graph;
using ad::Shape;
using ad::Tensor;
using ad::Var;
using Eigen::Index;

void DenoiserConfig::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "model: " + what); };
  if (embed_dim <= 0 || approx_embed_dim <= 0 || heads <= 0 || layers_detail <= 0 || layers_approx <= 0 ||
      time_embed_dim <= 0) {
    fail("sizes must be positive");
  }
  if (embed_dim % heads != 0 || approx_embed_dim % heads != 0) fail("embedding widths must be divisible by heads");
  if (time_embed_dim % 2 != 0) fail("time_embed_dim must be even");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
}

ModelLayout layout_of(const Pyramid& p) {
  ModelLayout m;
  m.features = p.features();
  for (const auto& level : p.levels) m.tokens.push_back(level.length());
  return m;
}

const Tensor& DenoiserParams::at(const std::string& name) const {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw Error(ErrorCode::ShapeMismatch, "no parameter named '" + name + "'");
  return it->second;
}

Tensor& DenoiserParams::at(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const DenoiserParams&>(*this).at(name));
}

Index DenoiserParams::parameter_count() const {
  Index n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

namespace {

std::string level_prefix(std::size_t l) { return "level" + std::to_string(l + 1) + "."; }
std::string block_prefix(std::size_t l, int b) { return level_prefix(l) + "block" + std::to_string(b) + "."; }

class Initializer {
 public:
  Initializer(DenoiserParams& p, std::uint64_t seed) : p_(p), seed_(seed) {}

  void normal(const std::string& name, Shape shape, double std = 0.02) {
    Tensor t(std::move(shape));
    NoiseStream s(derive_seed(seed_, fnv1a64(name)));
    for (Index i = 0; i < t.size(); ++i) t.data[i] = std * s.normal();
    p_.tensors[name] = std::move(t);
  }
  void zero(const std::string& name, Shape shape) { p_.tensors[name] = Tensor(std::move(shape)); }
  void linear(const std::string& name, Index in, Index out) {
    normal(name + ".w", {in, out});
    zero(name + ".b", {out});
  }
  void zero_linear(const std::string& name, Index in, Index out) {
    zero(name + ".w", {in, out});
    zero(name + ".b", {out});
  }

 private:
  DenoiserParams& p_;
  std::uint64_t seed_;
};

// Keys carry no bias: softmax is invariant to it, so it would never train.
void init_attention(Initializer& init, const std::string& pre, Index width) {
  for (const char* proj : {"q", "v", "o"}) init.linear(pre + proj, width, width);
  init.normal(pre + "k.w", {width, width});
}

}  // namespace

DenoiserParams init_denoiser(const DenoiserConfig& cfg, const ModelLayout& layout, std::uint64_t seed) {
  cfg.validate();
  if (layout.level_count() < 2 || layout.features < 1) {
    throw Error(ErrorCode::ShapeMismatch, "model layout needs at least one detail level and one feature");
  }
  DenoiserParams p;
  p.layout = layout;
  Initializer init(p, seed);
  const Index td = cfg.time_embed_dim;
  init.linear("time.1", td, td);
  init.linear("time.2", td, td);

  const std::size_t levels = layout.level_count();
  const Index w = cfg.fusion_width();
  for (std::size_t l = 0; l < levels; ++l) {
    const Index e = cfg.level_width(l, levels);
    const std::string pre = level_prefix(l);
    init.linear(pre + "embed", layout.features, e);
    init.normal(pre + "pos", {layout.tokens[l], e});
    for (int b = 0; b < cfg.level_layers(l, levels); ++b) {
      const std::string bp = block_prefix(l, b);
      init.zero_linear(bp + "ada", td, 4 * e);
      init_attention(init, bp + "attn.", e);
      init.linear(bp + "ffn1", e, 4 * e);
      init.linear(bp + "ffn2", 4 * e, e);
    }
    init.normal(pre + "pool.query", {e});
    init.normal(pre + "pool.k.w", {e, e});
    init.linear(pre + "pool.v", e, e);
    init.linear(pre + "head", e, layout.features);
    init.linear(pre + "fuse.in", e, w);
    init.zero_linear(pre + "fuse.gate", 2 * w, w);
    init.linear(pre + "fuse.out", w, e);
  }
  init_attention(init, "cross.", w);
  return p;
}

Eigen::VectorXd sinusoidal_embedding(double t, int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; 2 * i < dim; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / dim);
    v[2 * i] = std::sin(t * freq);
    if (2 * i + 1 < dim) v[2 * i + 1] = std::cos(t * freq);
  }
  return v;
}

ParamBinder::ParamBinder(Graph& g, const DenoiserParams& params, bool trainable)
    : g_(g), params_(params), trainable_(trainable) {}

Var ParamBinder::operator()(const std::string& name) {
  const auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Tensor& t = params_.at(name);
  const Var v = trainable_ ? g_.parameter(t, name) : g_.constant(t, name);
  bound_.emplace(name, v);
  return v;
}

namespace {

Var linear(ParamBinder& p, const std::string& name, Var x) {
  Graph& g = p.graph();
  return g.add(g.matmul(x, p(name + ".w")), p(name + ".b"));
}

// x: (N, S, E) -> (N, S, E), self-attention with `heads` heads.
Var multi_head_attention(ParamBinder& p, const std::string& pre, Var x, int heads, ForwardTrace* trace) {
  Graph& g = p.graph();
  const Index n = x.dim(0), s = x.dim(1), e = x.dim(2);
  const Index eh = e / heads;
  const auto split = [&](Var v) { return g.permute(g.reshape(v, {n, s, heads, eh}), {0, 2, 1, 3}); };
  const Var q = split(linear(p, pre + "q", x));
  const Var k = split(g.matmul(x, p(pre + "k.w")));
  const Var v = split(linear(p, pre + "v", x));
  const Var probs = g.softmax(g.scale(g.bmm(q, k, true), 1.0 / std::sqrt(static_cast<double>(eh))));
  if (trace) trace->attention.push_back(probs);
  const Var ctx = g.reshape(g.permute(g.bmm(probs, v), {0, 2, 1, 3}), {n, s, e});
  return linear(p, pre + "o", ctx);
}

constexpr double kLayerNormEps = 1e-6;

// LN(x) * (1 + scale) + shift with (N, 1, E) modulation.
Var modulate(Graph& g, Var x, Var shift, Var scale) {
  return g.add(g.mul(g.layer_norm(x, kLayerNormEps), g.add_scalar(scale, 1.0)), shift);
}

}  // namespace

Var time_embedding(ParamBinder& p, const std::vector<int>& t, const DenoiserConfig& cfg) {
  Graph& g = p.graph();
  const Index n = static_cast<Index>(t.size());
  const Index dim = cfg.time_embed_dim;
  Eigen::VectorXd feats(n * dim);
  for (Index i = 0; i < n; ++i) feats.segment(i * dim, dim) = sinusoidal_embedding(t[i], cfg.time_embed_dim);
  const Var s = g.constant({n, dim}, std::move(feats), "time.sinusoid");
  return linear(p, "time.2", g.gelu(linear(p, "time.1", s)));
}

Var level_forward(ParamBinder& p, Var coeffs, Var t_emb, std::size_t level, const DenoiserConfig& cfg,
                  ForwardTrace* trace) {
  Graph& g = p.graph();
  const std::string pre = level_prefix(level);
  const Var embed_w = p(pre + "embed.w");
  const Index e = embed_w.dim(1);
  if (coeffs.shape().size() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "level " + std::to_string(level + 1) + " input must be rank 3, got " +
                                              ad::to_string(coeffs.shape()));
  }
  const Index n = coeffs.dim(0);
  Var x = g.add(g.matmul(coeffs, embed_w), p(pre + "embed.b"));
  if (cfg.positional_encoding) x = g.add(x, p(pre + "pos"));

  const int heads = cfg.heads;
  // The block count comes from the parameters rather than the config.
  for (int b = 0; p.has(block_prefix(level, b) + "ada.w"); ++b) {
    const std::string bp = block_prefix(level, b);
    const Var mod = g.reshape(linear(p, bp + "ada", t_emb), {n, 1, 4 * e});
    const Var shift1 = g.slice(mod, 2, 0, e);
    const Var scale1 = g.slice(mod, 2, e, e);
    const Var shift2 = g.slice(mod, 2, 2 * e, e);
    const Var scale2 = g.slice(mod, 2, 3 * e, e);
    const Var h1 = modulate(g, x, shift1, scale1);
    x = g.add(x, g.dropout(multi_head_attention(p, bp + "attn.", h1, heads, trace), cfg.dropout));
    const Var h2 = modulate(g, x, shift2, scale2);
    const Var ff = linear(p, bp + "ffn2", g.gelu(linear(p, bp + "ffn1", h2)));
    x = g.add(x, g.dropout(ff, cfg.dropout));
  }
  return x;
}

Var attention_pool(ParamBinder& p, Var embeddings, std::size_t level, ForwardTrace* trace) {
  Graph& g = p.graph();
  const std::string pre = level_prefix(level);
  const Index n = embeddings.dim(0), d = embeddings.dim(1), e = embeddings.dim(2);
  const Var keys = g.matmul(embeddings, p(pre + "pool.k.w"));
  const Var values = linear(p, pre + "pool.v", embeddings);
  const Var query = g.reshape(p(pre + "pool.query"), {e, 1});
  const Var scores = g.scale(g.reshape(g.matmul(keys, query), {n, 1, d}), 1.0 / std::sqrt(static_cast<double>(e)));
  const Var weights = g.softmax(scores);
  if (trace) trace->attention.push_back(weights);
  return g.reshape(g.bmm(weights, values), {n, e});
}

std::vector<Var> cross_level_fuse(ParamBinder& p, const std::vector<Var>& pooled, const DenoiserConfig& cfg,
                                  ForwardTrace* trace) {
  if (!cfg.cross_attention) return pooled;
  Graph& g = p.graph();
  const std::size_t levels = pooled.size();
  const Index n = pooled.front().dim(0);
  std::vector<Var> projected, stacked;
  for (std::size_t l = 0; l < levels; ++l) {
    projected.push_back(linear(p, level_prefix(l) + "fuse.in", pooled[l]));
    const Index w = projected.back().dim(1);
    stacked.push_back(g.reshape(projected.back(), {n, 1, w}));
  }
  const Index w = projected.front().dim(1);
  const Var attended = multi_head_attention(p, "cross.", g.concat(stacked, 1), cfg.heads, trace);
  std::vector<Var> fused;
  for (std::size_t l = 0; l < levels; ++l) {
    const std::string pre = level_prefix(l);
    const Var att = g.reshape(g.slice(attended, 1, static_cast<Index>(l), 1), {n, w});
    const Var gate = g.sigmoid(linear(p, pre + "fuse.gate", g.concat({projected[l], att}, 1)));
    const Var context = linear(p, pre + "fuse.out", g.mul(gate, att));
    fused.push_back(g.add(pooled[l], context));
  }
  return fused;
}

std::vector<Var> denoiser_graph(ParamBinder& p, const Pyramid& noisy, const std::vector<int>& t,
                                const DenoiserConfig& cfg, ForwardTrace* trace) {
  Graph& g = p.graph();
  if (layout_of(noisy) != p.params().layout) {
    throw Error(ErrorCode::ShapeMismatch, "denoiser: pyramid shapes differ from the shapes the model was built for");
  }
  const Index n = noisy.samples();
  if (static_cast<Index>(t.size()) != n) {
    throw Error(ErrorCode::ShapeMismatch, "denoiser: " + std::to_string(t.size()) + " time steps for " +
                                              std::to_string(n) + " samples");
  }
  const Var t_emb = time_embedding(p, t, cfg);
  const std::size_t levels = noisy.levels.size();
  std::vector<Var> tokens, pooled;
  for (std::size_t l = 0; l < levels; ++l) {
    const auto& lv = noisy.levels[l];
    const Var c = g.constant({n, lv.length(), lv.features()}, lv.flat(), level_prefix(l) + "input");
    tokens.push_back(level_forward(p, c, t_emb, l, cfg, trace));
    pooled.push_back(attention_pool(p, tokens.back(), l, trace));
  }
  const std::vector<Var> fused = cross_level_fuse(p, pooled, cfg, trace);
  std::vector<Var> out;
  for (std::size_t l = 0; l < levels; ++l) {
    const Index e = tokens[l].dim(2);
    const Var h = g.add(tokens[l], g.reshape(fused[l], {n, 1, e}));
    // No normalization before the head: the residual stream carries the input
    // scale, which the noise estimate has to track when x_t is far out.
    out.push_back(linear(p, level_prefix(l) + "head", h));
  }
  return out;
}

Pyramid denoise_forward(const Pyramid& noisy, const std::vector<int>& t, const DenoiserParams& params,
                        const DenoiserConfig& cfg) {
  Graph g(false);
  ParamBinder p(g, params, false);
  const auto out = denoiser_graph(p, noisy, t, cfg);
  Pyramid pred = noisy;
  for (std::size_t l = 0; l < out.size(); ++l) pred.levels[l].flat() = out[l].value();
  return pred;
}

Pyramid denoise_forward(const Pyramid& noisy, int t, const DenoiserParams& params, const DenoiserConfig& cfg) {
  return denoise_forward(noisy, std::vector<int>(static_cast<std::size_t>(noisy.samples()), t), params, cfg);
}

DenoiseFn make_denoise_fn(const DenoiserParams& params, const DenoiserConfig& cfg) {
  return [&params, cfg](const Pyramid& noisy, int t) { return denoise_forward(noisy, t, params, cfg); };
}

}  // namespace wdiff
