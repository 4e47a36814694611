#include "selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "wdiff/autodiff.hpp"
#include "wdiff/checkpoint.hpp"
#include "wdiff/filterbank.hpp"
#include "wdiff/metrics.hpp"
#include "wdiff/pipeline.hpp"

namespace wdiff::cli {

using Eigen::Index;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

TimeSeriesBatch normal_batch(Index n, Index t, Index d, std::uint64_t seed) {
  NoiseStream s(seed);
  TimeSeriesBatch b(n, t, d);
  for (Index i = 0; i < b.size(); ++i) b.flat()[i] = s.normal();
  return b;
}

SelftestRow filters() {
  int failed = 0;
  for (const auto& name : supported_wavelets()) failed += !all_passed(verify_filter_identities(make_filter_bank(name)));
  const double db2 = (make_filter_bank("db2").h - db2_closed_form()).cwiseAbs().maxCoeff();
  return {"filter identities", failed == 0 && db2 < 1e-12,
          std::to_string(supported_wavelets().size()) + " banks, " + std::to_string(failed) + " failing, db2 dev " + num(db2)};
}

SelftestRow reconstruction() {
  double worst = 0.0;
  std::uint64_t seed = 1;
  for (const auto& name : supported_wavelets()) {
    const FilterBank fb = make_filter_bank(name);
    for (const auto mode : {BoundaryMode::symmetric, BoundaryMode::periodized}) {
      for (const Index T : {24, 64}) {
        const auto x = normal_batch(2, T, 3, seed++);
        const auto back = idwt(dwt(x, fb, level_count(T, fb.length()), mode), fb);
        worst = std::max(worst, (back.flat() - x.flat()).norm() / x.flat().norm());
      }
    }
  }
  return {"perfect reconstruction", worst < 1e-8, "max rel err " + num(worst)};
}

SelftestRow parseval() {
  double worst = 0.0;
  std::uint64_t seed = 100;
  for (const auto& name : supported_wavelets()) {
    const FilterBank fb = make_filter_bank(name);
    if (!fb.orthogonal) continue;
    const auto x = normal_batch(2, 32, 2, seed++);
    const auto pyr = dwt(x, fb, 2, BoundaryMode::periodized);
    const double e = x.flat().squaredNorm();
    worst = std::max(worst, std::abs(pyramid_energy(pyr).sum() - e) / e);
  }
  return {"parseval energy", worst < 1e-8, "max rel err " + num(worst)};
}

SelftestRow schedules() {
  const auto s = make_exponential_schedule(1000);
  bool ok = s.betas[0] == 1e-4 && std::abs(s.betas[999] - (1e-4 + 0.0199 * (1.0 - std::exp(-2.0)))) < 1e-12;
  for (const auto& sch : {s, make_cosine_schedule(1000)}) {
    for (int t = 1; t < sch.steps(); ++t) ok = ok && sch.alpha_bars[t] < sch.alpha_bars[t - 1];
  }
  return {"schedule endpoints", ok, "beta_0 = " + num(s.betas[0]) + ", alpha_bar_end = " + num(s.alpha_bars[999])};
}

SelftestRow autodiff() {
  using namespace ad;
  NoiseStream s(7);
  auto rnd = [&](Shape shape) {
    Tensor t(shape);
    for (Index i = 0; i < t.size(); ++i) t.data[i] = 0.5 * s.normal();
    return t;
  };
  std::vector<Tensor> params{rnd({3, 5}), rnd({5}), rnd({5, 2})};
  const Tensor x = rnd({4, 3});
  auto build = [&](Graph& g, const std::vector<Tensor>& p, std::vector<Var>* vars) {
    const Var w1 = g.parameter(p[0], "w1"), b1 = g.parameter(p[1], "b1"), w2 = g.parameter(p[2], "w2");
    if (vars) *vars = {w1, b1, w2};
    const Var h = g.gelu(g.add(g.matmul(g.constant(x, "x"), w1), b1));
    return g.mean(g.square(g.softmax(g.matmul(g.layer_norm(h), w2))));
  };
  Graph g;
  std::vector<Var> vars;
  g.backward(build(g, params, &vars));
  std::vector<Eigen::VectorXd> grads;
  for (const Var& v : vars) grads.push_back(g.grad(v));
  const auto res = finite_diff_check(
      [&](const std::vector<Tensor>& p) {
        Graph f;
        return build(f, p, nullptr).value()[0];
      },
      params, grads, 1e-6);
  return {"autodiff gradients", res.max_rel_error < 1e-6,
          std::to_string(res.coordinates) + " coords, max rel err " + num(res.max_rel_error)};
}

SelftestRow dtw_oracle() {
  using Seq = RowMatrix<double>;
  NoiseStream s(9);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Seq x(1 + s.below(5), 1), y(1 + s.below(5), 1);
    for (Index i = 0; i < x.rows(); ++i) x(i, 0) = static_cast<double>(s.below(3));
    for (Index i = 0; i < y.rows(); ++i) y(i, 0) = static_cast<double>(s.below(3));
    double best = INFINITY;
    std::function<void(Index, Index, double)> walk = [&](Index i, Index j, double acc) {
      acc += std::abs(x(i, 0) - y(j, 0));
      if (i + 1 == x.rows() && j + 1 == y.rows()) {
        best = std::min(best, acc);
        return;
      }
      if (i + 1 < x.rows()) walk(i + 1, j, acc);
      if (j + 1 < y.rows()) walk(i, j + 1, acc);
      if (i + 1 < x.rows() && j + 1 < y.rows()) walk(i + 1, j + 1, acc);
    };
    walk(0, 0, 0.0);
    mismatches += dtw(x, y) != best;
  }
  return {"dtw oracle", mismatches == 0, "100 pairs, " + std::to_string(mismatches) + " mismatches"};
}

SelftestRow metric_sanity() {
  const auto r = normal_batch(60, 12, 2, 11);
  const double js = dtw_js(r, r);
  const double corr = correlational_score(r, r);
  return {"metric sanity", js < 0.05 && corr == 0.0, "dtw_js(R,R) " + num(js) + ", corr(R,R) " + num(corr)};
}

DenoiserConfig tiny_model(bool cross) {
  DenoiserConfig c;
  c.embed_dim = 16;
  c.approx_embed_dim = 32;
  c.heads = 2;
  c.layers_detail = 1;
  c.layers_approx = 1;
  c.time_embed_dim = 8;
  c.dropout = 0.0;
  c.cross_attention = cross;
  return c;
}

SelftestRow cross_level() {
  PyramidShape shape{2, 2, 24, {13, 8, 5}, BoundaryMode::symmetric};
  NoiseStream s(13);
  const Pyramid x = normal_pyramid(shape, s);
  double on_change = INFINITY, off_change = 0.0;
  for (const bool cross : {true, false}) {
    const auto cfg = tiny_model(cross);
    DenoiserParams p = init_denoiser(cfg, layout_of(x), 3);
    NoiseStream r(14);
    for (auto& [name, t] : p.tensors) {
      for (Index i = 0; i < t.size(); ++i) t.data[i] = 0.2 * r.normal();
    }
    Pyramid bumped = x;
    bumped.levels[0].flat().array() += 0.5;
    const auto a = denoise_forward(x, 10, p, cfg);
    const auto b = denoise_forward(bumped, 10, p, cfg);
    for (std::size_t l = 1; l < a.levels.size(); ++l) {
      const double d = (a.levels[l].flat() - b.levels[l].flat()).cwiseAbs().maxCoeff();
      if (cross) {
        on_change = std::min(on_change, d);
      } else {
        off_change = std::max(off_change, d);
      }
    }
  }
  return {"cross-level flow", on_change > 0.0 && off_change == 0.0,
          "min change on " + num(on_change) + ", max change off " + num(off_change)};
}

SelftestRow persistence() {
  const auto raw = normal_batch(4, 24, 2, 15);
  RunConfig cfg;
  cfg.model = tiny_model(true);
  const Checkpoint ck = untrained_checkpoint(raw, cfg);
  const std::string bytes = serialize_checkpoint(ck);
  const bool ckpt_ok = serialize_checkpoint(deserialize_checkpoint(bytes)) == bytes;
  const auto back = batch_from_table(parse_csv(batch_to_csv(raw)));
  const double csv_err = (back.flat() - raw.flat()).cwiseAbs().maxCoeff();
  return {"persistence round trip", ckpt_ok && csv_err < 1e-12,
          std::string("checkpoint ") + (ckpt_ok ? "bit-exact" : "differs") + ", csv max err " + num(csv_err)};
}

}  // namespace

std::vector<SelftestRow> run_selftest() {
  const std::vector<std::pair<const char*, SelftestRow (*)()>> checks = {
      {"filter identities", filters}, {"perfect reconstruction", reconstruction}, {"parseval energy", parseval},
      {"schedule endpoints", schedules}, {"autodiff gradients", autodiff}, {"dtw oracle", dtw_oracle},
      {"metric sanity", metric_sanity}, {"cross-level flow", cross_level}, {"persistence round trip", persistence}};
  std::vector<SelftestRow> rows;
  for (const auto& [name, check] : checks) {
    try {
      rows.push_back(check());
    } catch (const std::exception& e) {
      rows.push_back({name, false, std::string("threw: ") + e.what()});
    }
  }
  return rows;
}

}  // namespace wdiff::cli
