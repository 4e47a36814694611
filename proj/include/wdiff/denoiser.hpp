#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wdiff/autodiff.hpp"
#include "wdiff/diffusion.hpp"
#include "wdiff/transform.hpp"

namespace wdiff {

struct DenoiserConfig {
  int embed_dim = 64;          // detail levels
  int approx_embed_dim = 128;  // approximation level
  int heads = 4;
  int layers_detail = 2;
  int layers_approx = 4;
  int time_embed_dim = 32;
  double dropout = 0.1;
  bool cross_attention = true;
  PredictionTarget prediction_target = PredictionTarget::noise;
  bool positional_encoding = true;

  // Throws InvalidConfig on non-positive sizes, odd time_embed_dim or widths
  // not divisible by heads.
  void validate() const;
  int level_width(std::size_t level, std::size_t level_count) const {
    return level + 1 == level_count ? approx_embed_dim : embed_dim;
  }
  int level_layers(std::size_t level, std::size_t level_count) const {
    return level + 1 == level_count ? layers_approx : layers_detail;
  }
  // Width of the shared cross-level attention space.
  int fusion_width() const { return std::min(embed_dim, approx_embed_dim); }
};

// Sizes the parameters are built for: D features and the token count of
// every level, approximation last.
struct ModelLayout {
  Eigen::Index features = 1;
  std::vector<Eigen::Index> tokens;

  std::size_t level_count() const { return tokens.size(); }
  bool operator==(const ModelLayout&) const = default;
};

ModelLayout layout_of(const Pyramid& p);

// Named tensors; std::map keeps iteration order stable across save/load.
struct DenoiserParams {
  std::map<std::string, ad::Tensor> tensors;
  ModelLayout layout;

  const ad::Tensor& at(const std::string& name) const;
  ad::Tensor& at(const std::string& name);
  Eigen::Index parameter_count() const;
};

// Weights ~ N(0, 0.02), biases zero; AdaLN modulation and gate maps zero.
DenoiserParams init_denoiser(const DenoiserConfig& cfg, const ModelLayout& layout, std::uint64_t seed);

// sin/cos features before the learned projection: entry 2i = sin(t w_i),
// entry 2i+1 = cos(t w_i), w_i = 10000^(-2i/dim).
Eigen::VectorXd sinusoidal_embedding(double t, int dim);

// Binds parameter tensors into a graph on first use. In evaluation graphs the
// tensors enter as constants so no backward closures are recorded.
class ParamBinder {
 public:
  ParamBinder(ad::Graph& g, const DenoiserParams& params, bool trainable);
  ad::Var operator()(const std::string& name);
  bool has(const std::string& name) const { return params_.tensors.count(name) > 0; }
  const std::map<std::string, ad::Var>& bound() const { return bound_; }
  const DenoiserParams& params() const { return params_; }
  ad::Graph& graph() { return g_; }

 private:
  ad::Graph& g_;
  const DenoiserParams& params_;
  bool trainable_;
  std::map<std::string, ad::Var> bound_;
};

// Softmax nodes recorded during a forward pass, for inspection.
struct ForwardTrace {
  std::vector<ad::Var> attention;
};

// Per-sample steps (N) -> learned time embedding (N, time_embed_dim).
ad::Var time_embedding(ParamBinder& p, const std::vector<int>& t, const DenoiserConfig& cfg);

// Level tokens (N, d_l, D) -> embeddings (N, d_l, E_l).
ad::Var level_forward(ParamBinder& p, ad::Var coeffs, ad::Var t_emb, std::size_t level, const DenoiserConfig& cfg,
                      ForwardTrace* trace = nullptr);

// (N, d_l, E_l) -> (N, E_l).
ad::Var attention_pool(ParamBinder& p, ad::Var embeddings, std::size_t level, ForwardTrace* trace = nullptr);

// Pooled vectors (N, E_l) per level -> fused vectors (N, E_l) per level.
std::vector<ad::Var> cross_level_fuse(ParamBinder& p, const std::vector<ad::Var>& pooled, const DenoiserConfig& cfg,
                                      ForwardTrace* trace = nullptr);

// Whole network on a graph; returns one (N, d_l, D) output per level.
std::vector<ad::Var> denoiser_graph(ParamBinder& p, const Pyramid& noisy, const std::vector<int>& t,
                                    const DenoiserConfig& cfg, ForwardTrace* trace = nullptr);

// Evaluation-mode forward pass (dropout off).
Pyramid denoise_forward(const Pyramid& noisy, const std::vector<int>& t, const DenoiserParams& params,
                        const DenoiserConfig& cfg);
Pyramid denoise_forward(const Pyramid& noisy, int t, const DenoiserParams& params, const DenoiserConfig& cfg);

// Wraps the model as a sampler closure.
DenoiseFn make_denoise_fn(const DenoiserParams& params, const DenoiserConfig& cfg);

}  // namespace wdiff
