#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "wdiff/transform.hpp"

using namespace wdiff;

namespace {

TimeSeriesBatch random_batch(Eigen::Index n, Eigen::Index t, Eigen::Index d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  TimeSeriesBatch b(n, t, d);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.flat()[i] = normal(rng);
  return b;
}

double max_rel_error(const TimeSeriesBatch& a, const TimeSeriesBatch& b) {
  return (a.flat() - b.flat()).cwiseAbs().maxCoeff() / std::max(1.0, b.flat().cwiseAbs().maxCoeff());
}

TimeSeriesBatch series_of(const std::vector<double>& v) {
  TimeSeriesBatch b(1, static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) b(0, static_cast<Eigen::Index>(i), 0) = v[i];
  return b;
}

}  // namespace

TEST_CASE("coeff_len recursion") {
  CHECK(coeff_len(24, 4, BoundaryMode::symmetric) == 13);
  CHECK(coeff_len(13, 4, BoundaryMode::symmetric) == 8);
  CHECK(coeff_len(8, 4, BoundaryMode::symmetric) == 5);
  CHECK(coeff_len(24, 2, BoundaryMode::symmetric) == 12);
  CHECK(coeff_len(24, 4, BoundaryMode::periodized) == 12);
  CHECK(coeff_len(5, 4, BoundaryMode::periodized) == 3);
}

TEST_CASE("level_count rule") {
  CHECK(level_count(24, 4) == 3);
  CHECK(level_count(128, 4) == 5);
  CHECK(level_count(1024, 2) == 7);
  // Lower clamp keeps three levels for short series.
  CHECK(level_count(8, 4) == 3);
  // Re-clamp: every returned depth leaves at least two coefficients.
  for (Eigen::Index t = 4; t <= 64; ++t) {
    for (Eigen::Index f : {2, 4, 6, 12, 16, 18}) {
      const int l = level_count(t, f);
      CHECK(level_lengths(t, f, l, BoundaryMode::symmetric).back() >= 2);
    }
  }
}

TEST_CASE("haar on constants and on 1,2,3,4") {
  const auto haar = make_filter_bank("db1");
  const auto c = TimeSeriesBatch::Constant(2, 8, 3, 1.5);
  const auto pc = dwt(c, haar, 1, BoundaryMode::periodized);
  CHECK(pc.levels[0].flat().cwiseAbs().maxCoeff() == 0.0);
  CHECK((pc.approx().flat().array() - 1.5 * std::sqrt(2.0)).abs().maxCoeff() < 1e-15);

  const auto x = series_of({1, 2, 3, 4});
  const auto p = dwt(x, haar, 1, BoundaryMode::periodized);
  const double r = std::sqrt(2.0);
  CHECK(p.approx()(0, 0, 0) == doctest::Approx(3 / r).epsilon(1e-15));
  CHECK(p.approx()(0, 1, 0) == doctest::Approx(7 / r).epsilon(1e-15));
  CHECK(p.levels[0](0, 0, 0) == doctest::Approx(-1 / r).epsilon(1e-15));
  CHECK(p.levels[0](0, 1, 0) == doctest::Approx(-1 / r).epsilon(1e-15));
  const auto back = idwt(p, haar);
  CHECK((back.flat() - x.flat()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("single-level coefficients agree with PyWavelets symmetric mode") {
  // Frozen from pywt.dwt(x, name, mode="symmetric").
  const auto x = series_of({1, 4, 2, 8, 5, 7, 3, 6, 0.5, 2.5});
  struct Case {
    const char* name;
    std::vector<double> approx, detail;
  };
  const std::vector<Case> cases = {
      {"db2",
       {2.4748737341529163, 3.24203968376971, 7.872908938542777, 8.166403160705805, 6.256534689503306,
        2.8284271247461903},
       {-1.8371173070873834, -3.216655692399971, -1.2501288627613267, -2.6042832567041767, -2.522240906898293,
        1.2247448713915892}},
      {"bior2.2",
       {3.7123106012293743, 1.7677669529663693, 5.303300858899107, 9.722718241315029, 6.80590276892052,
        2.563262081801235, 2.5632620818012346},
       {1.0606601717798214, -1.767766952966369, -3.1819805153394642, -2.1213203435596424, -3.0052038200428277,
        -0.7071067811865476, 2.6516504294495533}},
      {"coif1",
       {3.753731764470317, 2.168287527967019, 5.5896676511462875, 9.202497862394477, 6.793020051367945,
        3.007976830626044, 2.648877418866336},
       {1.3359349216941352, -1.7576572459970103, -3.5769550691736796, -2.0430417028806818, -3.1792075047562465,
        -0.6684586285288217, 2.9554636250522344}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const auto p = dwt(x, make_filter_bank(c.name), 1, BoundaryMode::symmetric);
    REQUIRE(p.approx().length() == static_cast<Eigen::Index>(c.approx.size()));
    for (std::size_t i = 0; i < c.approx.size(); ++i) {
      CHECK(p.approx()(0, static_cast<Eigen::Index>(i), 0) == doctest::Approx(c.approx[i]).epsilon(1e-12));
      CHECK(p.levels[0](0, static_cast<Eigen::Index>(i), 0) == doctest::Approx(c.detail[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("level lengths for a short db2 batch") {
  const auto b = random_batch(4, 24, 7, 1);
  const auto p = dwt(b, make_filter_bank("db2"), 3, BoundaryMode::symmetric);
  CHECK(p.level_lengths == std::vector<Eigen::Index>{13, 8, 5});
  REQUIRE(p.levels.size() == 4);
  CHECK(p.approx().length() == 5);
  for (const auto& lv : p.levels) {
    CHECK(lv.samples() == 4);
    CHECK(lv.features() == 7);
  }
}

TEST_CASE("round trip for every family, mode and length") {
  unsigned seed = 10;
  for (const auto& name : supported_wavelets()) {
    const auto fb = make_filter_bank(name);
    for (const auto mode : {BoundaryMode::symmetric, BoundaryMode::periodized}) {
      for (const Eigen::Index t : {24, 32, 64, 128, 25, 31}) {
        CAPTURE(name);
        CAPTURE(t);
        CAPTURE(to_string(mode));
        const int levels = level_count(t, fb.length());
        const auto lens = level_lengths(t, fb.length(), levels, mode);
        if (lens.back() < 2) continue;
        const auto x = random_batch(3, t, 2, seed++);
        const auto back = idwt(dwt(x, fb, levels, mode), fb);
        CHECK(max_rel_error(back, x) < 1e-10);
      }
    }
  }
}

TEST_CASE("db4 symmetric five-level round trip") {
  const auto x = random_batch(8, 128, 3, 99);
  const auto fb = make_filter_bank("db4");
  const auto back = idwt(dwt(x, fb, 5, BoundaryMode::symmetric), fb);
  CHECK((back.flat() - x.flat()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("constant series lives in the approximation") {
  for (const auto& name : supported_wavelets()) {
    CAPTURE(name);
    const auto fb = make_filter_bank(name);
    const auto c = TimeSeriesBatch::Constant(2, 32, 2, -0.75);
    auto p = dwt(c, fb, 3, BoundaryMode::symmetric);
    for (int l = 0; l < p.depth(); ++l) p.levels[l].flat().setZero();
    CHECK((idwt(p, fb).flat().array() + 0.75).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("parseval for orthogonal periodized transforms") {
  unsigned seed = 500;
  for (const auto& name : supported_wavelets()) {
    const auto fb = make_filter_bank(name);
    if (!fb.orthogonal) continue;
    CAPTURE(name);
    const auto x = random_batch(4, 64, 3, seed++);
    const auto p = dwt(x, fb, 3, BoundaryMode::periodized);
    const double total = pyramid_energy(p).sum();
    const double signal = x.flat().squaredNorm();
    CHECK(std::abs(total - signal) / signal < 1e-12);
  }
}

TEST_CASE("pyramid energy") {
  const auto fb = make_filter_bank("db2");
  auto p = dwt(random_batch(3, 24, 2, 7), fb, 3, BoundaryMode::symmetric);
  const auto e = pyramid_energy(p);
  CHECK(e.size() == 4);
  auto doubled = p;
  for (auto& lv : doubled.levels) lv.flat() *= 2.0;
  CHECK(((pyramid_energy(doubled) - 4.0 * e).cwiseAbs().maxCoeff()) < 1e-12);
  CHECK(pyramid_energy(zeros_like(p)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linearity and sample/feature permutation") {
  const auto fb = make_filter_bank("sym4");
  const auto x = random_batch(5, 32, 3, 21);
  const auto y = random_batch(5, 32, 3, 22);
  TimeSeriesBatch z(5, 32, 3);
  z.flat() = 1.7 * x.flat() - 0.4 * y.flat();
  const auto px = dwt(x, fb, 3, BoundaryMode::symmetric);
  const auto py = dwt(y, fb, 3, BoundaryMode::symmetric);
  const auto pz = dwt(z, fb, 3, BoundaryMode::symmetric);
  for (std::size_t l = 0; l < pz.levels.size(); ++l) {
    CHECK((pz.levels[l].flat() - (1.7 * px.levels[l].flat() - 0.4 * py.levels[l].flat())).cwiseAbs().maxCoeff() <
          1e-10);
  }

  // Reverse sample order and rotate features.
  TimeSeriesBatch perm(5, 32, 3);
  for (Eigen::Index n = 0; n < 5; ++n)
    for (Eigen::Index d = 0; d < 3; ++d) perm.series(4 - n, (d + 1) % 3) = x.series(n, d);
  const auto pp = dwt(perm, fb, 3, BoundaryMode::symmetric);
  for (std::size_t l = 0; l < pp.levels.size(); ++l)
    for (Eigen::Index n = 0; n < 5; ++n)
      for (Eigen::Index d = 0; d < 3; ++d)
        CHECK((pp.levels[l].series(4 - n, (d + 1) % 3) - px.levels[l].series(n, d)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("error paths") {
  const auto fb = make_filter_bank("db8");
  const auto x = random_batch(1, 8, 1, 3);
  CHECK_THROWS_AS(dwt(x, make_filter_bank("db1"), 4, BoundaryMode::periodized), Error);
  try {
    (void)dwt(random_batch(1, 4, 1, 3), make_filter_bank("db1"), 3, BoundaryMode::periodized);
    FAIL("expected TooManyLevels");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooManyLevels);
  }
  auto p = dwt(random_batch(2, 24, 2, 4), make_filter_bank("db2"), 3, BoundaryMode::symmetric);
  p.level_lengths[1] = 9;
  try {
    (void)idwt(p, make_filter_bank("db2"));
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
  (void)fb;
}
