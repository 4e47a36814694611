#include "doctest.h"

#include <cmath>
#include <set>

#include "wdiff/denoiser.hpp"

using namespace wdiff;
using ad::Graph;
using ad::Shape;
using ad::Tensor;
using ad::Var;

namespace {

DenoiserConfig tiny_config(bool cross = true) {
  DenoiserConfig cfg;
  cfg.embed_dim = 16;
  cfg.approx_embed_dim = 32;
  cfg.heads = 2;
  cfg.layers_detail = 1;
  cfg.layers_approx = 1;
  cfg.time_embed_dim = 8;
  cfg.dropout = 0.0;
  cfg.cross_attention = cross;
  return cfg;
}

// T=24, D=2, db2 with three levels: lengths [13, 8, 5] plus the approximation.
PyramidShape tiny_shape(Eigen::Index n = 3) {
  PyramidShape s;
  s.samples = n;
  s.features = 2;
  s.source_length = 24;
  s.level_lengths = {13, 8, 5};
  return s;
}

Pyramid random_pyramid(const PyramidShape& shape, std::uint64_t seed) {
  NoiseStream s(seed);
  return normal_pyramid(shape, s);
}

// Randomizes every tensor, including the zero-initialized ones, so all paths
// carry signal.
DenoiserParams randomized(DenoiserParams p, std::uint64_t seed, double scale = 0.2) {
  NoiseStream s(seed);
  for (auto& [name, t] : p.tensors) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = scale * s.normal();
  }
  return p;
}

double max_abs_diff(const Array3<double>& a, const Array3<double>& b) {
  return (a.flat() - b.flat()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("sinusoidal embedding") {
  const Eigen::VectorXd e0 = sinusoidal_embedding(0, 16);
  for (int i = 0; i < 16; ++i) CHECK(e0[i] == (i % 2 == 0 ? 0.0 : 1.0));
  std::set<std::vector<double>> seen;
  for (int t = 0; t < 10000; ++t) {
    const Eigen::VectorXd e = sinusoidal_embedding(t, 32);
    CHECK(e.cwiseAbs().maxCoeff() <= 1.0);
    seen.insert(std::vector<double>(e.data(), e.data() + e.size()));
  }
  CHECK(seen.size() == 10000);
  const double w1 = std::pow(10000.0, -2.0 / 16.0);
  CHECK(sinusoidal_embedding(7, 16)[2] == std::sin(7 * w1));
  CHECK(sinusoidal_embedding(7, 16)[3] == std::cos(7 * w1));
}

TEST_CASE("configuration validation") {
  DenoiserConfig cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.heads = 3;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.time_embed_dim = 7;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("initialization") {
  const auto cfg = tiny_config();
  const auto x = random_pyramid(tiny_shape(), 1);
  const auto p = init_denoiser(cfg, layout_of(x), 5);
  CHECK(p.at("level1.block0.ada.w").data.isZero());
  CHECK(p.at("level4.fuse.gate.w").data.isZero());
  CHECK(p.at("level1.embed.b").data.isZero());
  const auto& w = p.at("level4.block0.ffn1.w").data;
  CHECK(w.size() == 32 * 128);
  const double sd = std::sqrt(w.squaredNorm() / static_cast<double>(w.size()));
  CHECK(sd == doctest::Approx(0.02).epsilon(0.05));
  CHECK(p.at("cross.q.w").shape == Shape{16, 16});
  const auto again = init_denoiser(cfg, layout_of(x), 5);
  for (const auto& [name, t] : p.tensors) CHECK(again.at(name).data == t.data);
}

TEST_CASE("output has the input's level shapes") {
  const auto cfg = tiny_config();
  for (const Eigen::Index t_len : {24, 32, 40}) {
    for (const Eigen::Index d : {1, 3}) {
      PyramidShape s;
      s.samples = 2;
      s.features = d;
      s.source_length = t_len;
      s.level_lengths = level_lengths(t_len, 4, level_count(t_len, 4), BoundaryMode::symmetric);
      const auto x = random_pyramid(s, 3);
      const auto p = init_denoiser(cfg, layout_of(x), 9);
      const auto y = denoise_forward(x, 10, p, cfg);
      REQUIRE(y.levels.size() == x.levels.size());
      for (std::size_t l = 0; l < x.levels.size(); ++l) CHECK(y.levels[l].same_shape(x.levels[l]));
      CHECK(same_structure(x, y));
    }
  }
}

TEST_CASE("shape mismatch against the built layout") {
  const auto cfg = tiny_config();
  const auto p = init_denoiser(cfg, layout_of(random_pyramid(tiny_shape(), 1)), 2);
  PyramidShape other = tiny_shape();
  other.features = 3;
  CHECK_THROWS_AS(denoise_forward(random_pyramid(other, 1), 0, p, cfg), Error);
  const auto x = random_pyramid(tiny_shape(2), 1);
  CHECK_THROWS_AS(denoise_forward(x, std::vector<int>{1}, p, cfg), Error);
}

TEST_CASE("every softmax is row-stochastic") {
  const auto cfg = tiny_config();
  const auto x = random_pyramid(tiny_shape(), 4);
  const auto p = randomized(init_denoiser(cfg, layout_of(x), 4), 8, 0.5);
  Graph g;
  ParamBinder b(g, p, false);
  ForwardTrace trace;
  denoiser_graph(b, x, {0, 50, 199}, cfg, &trace);
  // 4 levels x 1 block self-attention, 4 pools, 1 cross-level attention.
  CHECK(trace.attention.size() == 9);
  for (const Var& a : trace.attention) {
    const Eigen::Index w = a.shape().back();
    const Eigen::Index rows = a.value().size() / w;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto row = a.value().segment(r * w, w);
      CHECK(std::abs(row.sum() - 1.0) < 1e-9);
      CHECK(row.minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("zeroed AdaLN modulation removes the time dependence") {
  const auto cfg = tiny_config();
  const auto x = random_pyramid(tiny_shape(), 5);
  auto p = randomized(init_denoiser(cfg, layout_of(x), 5), 6);
  const auto a_before = denoise_forward(x, 3, p, cfg);
  const auto b_before = denoise_forward(x, 150, p, cfg);
  CHECK(max_abs_diff(a_before.levels[0], b_before.levels[0]) > 1e-6);
  for (auto& [name, t] : p.tensors) {
    if (name.ends_with("ada.w")) t.data.setZero();
  }
  const auto a = denoise_forward(x, 3, p, cfg);
  const auto b = denoise_forward(x, 150, p, cfg);
  for (std::size_t l = 0; l < a.levels.size(); ++l) CHECK(a.levels[l].flat() == b.levels[l].flat());
}

TEST_CASE("attention pooling") {
  const auto cfg = tiny_config();
  const auto x = random_pyramid(tiny_shape(), 5);
  const auto p = randomized(init_denoiser(cfg, layout_of(x), 5), 7);
  const Eigen::Index e = 16;
  NoiseStream s(10);
  const auto value_projection = [&](const Eigen::VectorXd& token) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
        p.at("level1.pool.v.w").data.data(), e, e);
    return Eigen::VectorXd(w.transpose() * token + p.at("level1.pool.v.b").data);
  };

  SUBCASE("single token") {
    Eigen::VectorXd tok(e);
    for (auto& v : tok) v = s.normal();
    Graph g;
    ParamBinder b(g, p, false);
    const Var out = attention_pool(b, g.constant({1, 1, e}, tok), 0);
    CHECK((out.value() - value_projection(tok)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("identical tokens") {
    Eigen::VectorXd tok(e);
    for (auto& v : tok) v = s.normal();
    Graph g;
    ParamBinder b(g, p, false);
    const Var out = attention_pool(b, g.constant({1, 5, e}, tok.replicate(5, 1)), 0);
    CHECK((out.value() - value_projection(tok)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("token permutation invariance") {
    Eigen::VectorXd toks(2 * 6 * e);
    for (auto& v : toks) v = s.normal();
    const std::vector<int> perm{3, 0, 5, 1, 4, 2};
    Eigen::VectorXd permuted(toks.size());
    for (int n = 0; n < 2; ++n) {
      for (int i = 0; i < 6; ++i) permuted.segment((n * 6 + i) * e, e) = toks.segment((n * 6 + perm[i]) * e, e);
    }
    Graph g;
    ParamBinder b(g, p, false);
    const Var a = attention_pool(b, g.constant({2, 6, e}, toks), 0);
    const Var c = attention_pool(b, g.constant({2, 6, e}, permuted), 0);
    CHECK((a.value() - c.value()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("positional encodings off make the level stack permutation-equivariant") {
  auto cfg = tiny_config();
  cfg.positional_encoding = false;
  const auto x = random_pyramid(tiny_shape(1), 5);
  const auto p = randomized(init_denoiser(cfg, layout_of(x), 5), 7);
  const auto& lv = x.levels[1];
  const Eigen::Index d = lv.length(), f = lv.features();
  Eigen::VectorXd rev(lv.flat().size());
  for (Eigen::Index i = 0; i < d; ++i) rev.segment(i * f, f) = lv.flat().segment((d - 1 - i) * f, f);
  Graph g;
  ParamBinder b(g, p, false);
  const Var t_emb = time_embedding(b, {4}, cfg);
  const Var a = attention_pool(b, level_forward(b, g.constant({1, d, f}, lv.flat()), t_emb, 1, cfg), 1);
  const Var c = attention_pool(b, level_forward(b, g.constant({1, d, f}, rev), t_emb, 1, cfg), 1);
  CHECK((a.value() - c.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cross-level fusion") {
  const auto x = random_pyramid(tiny_shape(2), 5);
  const auto base = init_denoiser(tiny_config(), layout_of(x), 5);

  SUBCASE("disabled fusion passes pooled vectors through") {
    const auto cfg = tiny_config(false);
    Graph g;
    ParamBinder b(g, base, false);
    std::vector<Var> pooled{g.constant(Tensor({2, 16})), g.constant(Tensor({2, 32}))};
    const auto fused = cross_level_fuse(b, pooled, cfg);
    CHECK(fused[0].id() == pooled[0].id());
    CHECK(fused[1].id() == pooled[1].id());
  }
  SUBCASE("closed gates leave pooled vectors untouched") {
    auto p = randomized(base, 3);
    for (auto& [name, t] : p.tensors) {
      if (name.ends_with("fuse.gate.w") || name.ends_with("fuse.out.b")) t.data.setZero();
      if (name.ends_with("fuse.gate.b")) t.data.setConstant(-800.0);
    }
    Graph g;
    ParamBinder b(g, p, false);
    NoiseStream s(1);
    std::vector<Var> pooled;
    for (const Eigen::Index e : {16, 16, 16, 32}) {
      Eigen::VectorXd v(2 * e);
      for (auto& c : v) c = s.normal();
      pooled.push_back(g.constant({2, e}, v));
    }
    const auto fused = cross_level_fuse(b, pooled, tiny_config());
    for (std::size_t l = 0; l < pooled.size(); ++l) {
      CHECK((fused[l].value() - pooled[l].value()).cwiseAbs().maxCoeff() < 1e-300);
    }
  }
  SUBCASE("a single level attends to itself") {
    const auto p = randomized(base, 4);
    using RM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto mat = [&](const std::string& n) {
      const auto& t = p.at(n);
      return Eigen::Map<const RM>(t.data.data(), t.shape[0], t.shape[1]);
    };
    const auto vec = [&](const std::string& n) { return p.at(n).data; };
    NoiseStream s(2);
    Eigen::VectorXd pooled(16);
    for (auto& c : pooled) c = s.normal();
    const Eigen::VectorXd proj = mat("level1.fuse.in.w").transpose() * pooled + vec("level1.fuse.in.b");
    const Eigen::VectorXd value = mat("cross.v.w").transpose() * proj + vec("cross.v.b");
    const Eigen::VectorXd att = mat("cross.o.w").transpose() * value + vec("cross.o.b");
    Eigen::VectorXd cat(32);
    cat << proj, att;
    const Eigen::VectorXd pre = mat("level1.fuse.gate.w").transpose() * cat + vec("level1.fuse.gate.b");
    const Eigen::VectorXd gate = (1.0 + (-pre.array()).exp()).inverse().matrix();
    const Eigen::VectorXd expected =
        pooled + mat("level1.fuse.out.w").transpose() * gate.cwiseProduct(att) + vec("level1.fuse.out.b");

    Graph g;
    ParamBinder b(g, p, false);
    const auto fused = cross_level_fuse(b, {g.constant({1, 16}, pooled)}, tiny_config());
    CHECK((fused[0].value() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("information flows across levels only with cross-attention") {
  const auto x = random_pyramid(tiny_shape(2), 11);
  for (const bool cross : {true, false}) {
    const auto cfg = tiny_config(cross);
    const auto p = randomized(init_denoiser(cfg, layout_of(x), 12), 13);
    const auto base = denoise_forward(x, {5, 90}, p, cfg);
    for (std::size_t j = 0; j < x.levels.size(); ++j) {
      Pyramid bumped = x;
      NoiseStream s(100 + j);
      for (auto& v : bumped.levels[j].flat()) v += 0.5 * s.normal();
      const auto out = denoise_forward(bumped, {5, 90}, p, cfg);
      for (std::size_t i = 0; i < x.levels.size(); ++i) {
        const double diff = max_abs_diff(out.levels[i], base.levels[i]);
        if (i == j) {
          CHECK(diff > 0.0);
        } else if (cross) {
          CHECK(diff > 1e-8);
        } else {
          CHECK(diff == 0.0);
        }
      }
    }
  }
}

TEST_CASE("evaluation is deterministic") {
  const auto cfg = tiny_config();
  const auto x = random_pyramid(tiny_shape(), 5);
  const auto p = randomized(init_denoiser(cfg, layout_of(x), 5), 1);
  const auto a = denoise_forward(x, 17, p, cfg);
  const auto b = denoise_forward(x, 17, p, cfg);
  for (std::size_t l = 0; l < a.levels.size(); ++l) CHECK(a.levels[l].flat() == b.levels[l].flat());
}

TEST_CASE("denoiser gradient matches finite differences") {
  for (const bool cross : {true, false}) {
    const auto cfg = tiny_config(cross);
    const auto x = random_pyramid(tiny_shape(2), 21);
    const std::vector<int> t{7, 140};
    const auto p = randomized(init_denoiser(cfg, layout_of(x), 22), 23);

    std::vector<std::string> names;
    std::vector<Tensor> tensors;
    for (const auto& [name, tensor] : p.tensors) {
      names.push_back(name);
      tensors.push_back(tensor);
    }
    const auto loss_of = [&](Graph& g, ParamBinder& b) {
      Var total = g.scalar(0.0);
      for (const Var& out : denoiser_graph(b, x, t, cfg)) total = g.add(total, g.mean(g.square(out)));
      return total;
    };
    Graph g;
    ParamBinder b(g, p, true);
    const Var loss = loss_of(g, b);
    g.backward(loss);
    std::vector<Eigen::VectorXd> grads;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto it = b.bound().find(names[i]);
      grads.push_back(it == b.bound().end() ? Eigen::VectorXd::Zero(tensors[i].size()) : g.grad(it->second));
    }
    const auto f = [&](const std::vector<Tensor>& ts) {
      DenoiserParams q = p;
      for (std::size_t i = 0; i < names.size(); ++i) q.tensors[names[i]] = ts[i];
      Graph h;
      ParamBinder hb(h, q, false);
      return loss_of(h, hb).value()[0];
    };
    const auto res = ad::finite_diff_check(f, tensors, grads, 1e-5, 200, 31);
    CHECK(res.coordinates == 200);
    CHECK(res.max_rel_error < 1e-4);
  }
}
