#include "doctest.h"

#include <filesystem>
#include <random>

#include "wdiff/config.hpp"
#include "wdiff/data.hpp"
#include "wdiff/error.hpp"
#include "wdiff/rng.hpp"

using namespace wdiff;
using Eigen::Index;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

TimeSeriesBatch random_batch(Index n, Index t, Index d, std::uint64_t seed) {
  NoiseStream s(seed);
  TimeSeriesBatch b(n, t, d);
  for (Index i = 0; i < b.size(); ++i) b.flat()[i] = 3.0 * s.normal() + 1.5;
  return b;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "wdiff_test_data";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("csv: three rows, two columns") {
  const auto t = parse_csv("a,b\n1,2\n3.5,-4\n5e-1,6\n");
  CHECK(t.columns == std::vector<std::string>{"a", "b"});
  REQUIRE(t.values.rows() == 3);
  REQUIRE(t.values.cols() == 2);
  CHECK(t.values(1, 0) == 3.5);
  CHECK(t.values(1, 1) == -4.0);
  CHECK(t.values(2, 0) == 0.5);
}

TEST_CASE("csv: header only or empty is EmptyData") {
  CHECK(code_of([] { parse_csv("a,b\n"); }) == ErrorCode::EmptyData);
  CHECK(code_of([] { parse_csv(""); }) == ErrorCode::EmptyData);
}

TEST_CASE("csv: trailing blank lines ignored") {
  const auto plain = parse_csv("x,y\n1,2\n3,4");
  const auto padded = parse_csv("x,y\r\n1,2\r\n3,4\r\n\r\n\n");
  CHECK(plain.values == padded.values);
  CHECK(plain.columns == padded.columns);
}

TEST_CASE("csv: non-numeric cell and wrong cell count report position") {
  try {
    parse_csv("a,b\n1,2\n3,oops\n", "f.csv");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonNumericCell);
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
  }
  try {
    parse_csv("a,b\n1,2,3\n", "g.csv");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("csv: file round trip through load_csv") {
  const auto path = scratch("small.csv").string();
  write_file_atomic(path, "p,q\n1,2\n3,4\n\n");
  const auto t = load_csv(path);
  CHECK(t.values.rows() == 2);
  CHECK(t.values(1, 1) == 4.0);
  CHECK(code_of([] { load_csv("/nonexistent/definitely/missing.csv"); }) == ErrorCode::IoError);
}

TEST_CASE("windows: count examples") {
  RowMatrix<double> s(26, 2);
  for (Index i = 0; i < 26; ++i) s.row(i) << i, -i;
  CHECK(sliding_windows(s, 24, 1).samples() == 3);

  const auto one = sliding_windows(s, 26, 1);
  REQUIRE(one.samples() == 1);
  CHECK(one.sample(0) == s);

  const auto disjoint = sliding_windows(s, 8, 8);
  CHECK(disjoint.samples() == 3);
  CHECK(disjoint(1, 0, 0) == 8.0);
  CHECK(disjoint(2, 7, 1) == -23.0);

  CHECK(code_of([&] { sliding_windows(s, 27, 1); }) == ErrorCode::WindowTooLong);
}

TEST_CASE("windows: count formula and start offsets hold for all small cases") {
  for (Index total = 1; total <= 40; ++total) {
    RowMatrix<double> s(total, 1);
    for (Index i = 0; i < total; ++i) s(i, 0) = static_cast<double>(i);
    for (Index len = 1; len <= total; ++len) {
      for (Index stride = 1; stride <= 9; ++stride) {
        const auto w = sliding_windows(s, len, stride);
        REQUIRE(w.samples() == (total - len) / stride + 1);
        for (Index i = 0; i < w.samples(); ++i) REQUIRE(w(i, 0, 0) == static_cast<double>(i * stride));
        REQUIRE(w(w.samples() - 1, len - 1, 0) <= static_cast<double>(total - 1));
      }
    }
  }
}

TEST_CASE("normalize: minmax on [2, 4]") {
  TimeSeriesBatch b(1, 3, 1);
  b(0, 0, 0) = 2.0;
  b(0, 1, 0) = 3.0;
  b(0, 2, 0) = 4.0;
  const auto n = normalize(b, Normalization::minmax);
  CHECK(n.batch(0, 0, 0) == 0.0);
  CHECK(n.batch(0, 1, 0) == 0.5);
  CHECK(n.batch(0, 2, 0) == 1.0);
  CHECK(denormalize(n.batch, n.record).flat() == b.flat());
}

TEST_CASE("normalize: constant feature maps to 0.5 and back") {
  TimeSeriesBatch b(2, 4, 2);
  for (Index i = 0; i < b.size(); ++i) b.flat()[i] = static_cast<double>(i);
  for (Index n = 0; n < 2; ++n) {
    for (Index t = 0; t < 4; ++t) b(n, t, 1) = 7.25;
  }
  const auto n = normalize(b, Normalization::minmax);
  for (Index s = 0; s < 2; ++s) {
    for (Index t = 0; t < 4; ++t) CHECK(n.batch(s, t, 1) == 0.5);
  }
  const auto back = denormalize(n.batch, n.record);
  for (Index s = 0; s < 2; ++s) {
    for (Index t = 0; t < 4; ++t) CHECK(back(s, t, 1) == 7.25);
  }
}

TEST_CASE("normalize: round trip below 1e-12 for every mode") {
  const auto b = random_batch(16, 24, 3, 11);
  for (const auto mode : {Normalization::minmax, Normalization::zscore, Normalization::none}) {
    const auto n = normalize(b, mode);
    CHECK((denormalize(n.batch, n.record).flat() - b.flat()).cwiseAbs().maxCoeff() < 1e-12);
  }
  const auto mm = normalize(b, Normalization::minmax);
  CHECK(mm.batch.flat().minCoeff() == 0.0);
  CHECK(mm.batch.flat().maxCoeff() == doctest::Approx(1.0).epsilon(1e-15));
  const auto z = normalize(b, Normalization::zscore).batch.rows();
  for (Index k = 0; k < 3; ++k) {
    CHECK(std::abs(z.col(k).mean()) < 1e-12);
    CHECK(z.col(k).squaredNorm() / static_cast<double>(z.rows()) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("batch csv: round trip within 1e-12 through a file") {
  const auto b = random_batch(5, 7, 2, 3);
  const auto path = scratch("batch.csv").string();
  write_file_atomic(path, batch_to_csv(b));
  const auto back = load_dataset(path, 999);
  REQUIRE(back.same_shape(b));
  CHECK((back.flat() - b.flat()).cwiseAbs().maxCoeff() < 1e-12);

  const auto text = batch_to_csv(b);
  CHECK(text.rfind("sample,feature_0,feature_1\n", 0) == 0);
}

TEST_CASE("batch csv: inconsistent sample ids rejected") {
  CHECK(code_of([] { batch_from_table(parse_csv("sample,a\n0,1\n2,1\n")); }) == ErrorCode::ParseError);
  CHECK(code_of([] { batch_from_table(parse_csv("sample,a\n0,1\n0,1\n1,1\n")); }) == ErrorCode::ParseError);
  CHECK(code_of([] { batch_from_table(parse_csv("a,b\n0,1\n")); }) == ErrorCode::ParseError);
}

TEST_CASE("config: text round trip and overrides") {
  RunConfig c;
  c.model.embed_dim = 24;
  c.model.cross_attention = false;
  c.model.prediction_target = PredictionTarget::coefficients;
  c.train.level_weights = {1.0, 0.5, 1.0, 2.0};
  c.train.lr_max = 1.0 / 3.0;
  c.train.seed = 18446744073709551615ULL;
  c.schedule.kind = ScheduleKind::cosine;
  c.wavelet.name = "sym4";
  c.wavelet.mode = BoundaryMode::periodized;
  c.data.normalization = Normalization::zscore;
  c.sampler.sampler = SamplerKind::ddim;
  c.sampler.ddim_stride = 5;

  const auto back = parse_config(to_text(c));
  CHECK(to_text(back) == to_text(c));
  CHECK(back.train.lr_max == c.train.lr_max);
  CHECK(back.train.seed == c.train.seed);
  CHECK(back.sampler.prediction_target == PredictionTarget::coefficients);

  const auto over = parse_config("# comment\nmodel.heads = 8  # trailing\n\ntrain.epochs=7\n", c);
  CHECK(over.model.heads == 8);
  CHECK(over.train.epochs == 7);
  CHECK(over.model.embed_dim == 24);

  CHECK(code_of([] { parse_config("model.nope = 1\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config("model.heads = four\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config("model.cross_attention = maybe\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config("schedule.kind = linear\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config("just words\n"); }) == ErrorCode::ParseError);
}

TEST_CASE("config: model text excludes training-only keys") {
  RunConfig a, b;
  b.train.epochs = 1;
  b.sampler.seed = 9;
  CHECK(model_text(a) == model_text(b));
  b.model.heads = 2;
  CHECK(model_text(a) != model_text(b));
}
