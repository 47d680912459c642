#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ertl/errors.hpp"
#include "ertl/model.hpp"
#include "ertl/rng.hpp"
#include "ertl/types.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace ertl;

TEST_SUITE("types_model") {

TEST_CASE("source pair canonical ordering") {
  const SourcePair p = SourcePair::of(2, 1);
  CHECK(p.a == 1);
  CHECK(p.b == 2);
  CHECK(SourcePair::of(1, 2) == p);
  CHECK_THROWS_AS(SourcePair::of(3, 3), std::invalid_argument);
  CHECK_THROWS_AS(SourcePair::of(-1, 2), std::invalid_argument);
}

TEST_CASE("label canonicalization") {
  CHECK(canonical_label(1) == 1);
  CHECK(canonical_label(-1) == -1);
  CHECK(canonical_label(0) == -1);
  CHECK_THROWS_AS(canonical_label(2), std::invalid_argument);
}

TEST_CASE("combined weight hand case") {
  TransferModel m;
  m.dim = 1;
  m.feature_names = {"f0"};
  m.sources = {"s0", "s1", "s2"};
  m.w0 = {1.0};
  m.w = {{0.0}, {2.0}, {4.0}};
  const auto cw = m.combined_weight(SourcePair::of(1, 2));
  REQUIRE(cw.size() == 1);
  CHECK(cw[0] == doctest::Approx(4.0));
}

TEST_CASE("all-zero per-source vectors reduce to w0") {
  auto m = oracle::random_model(11, 4, 3);
  for (auto& wi : m.w) wi.assign(m.dim, 0.0);
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      const auto cw = m.combined_weight(SourcePair::of(i, j));
      for (int t = 0; t < m.dim; ++t) CHECK(cw[t] == m.w0[t]);
    }
  }
}

TEST_CASE("combined weight and score are pair-symmetric bitwise") {
  const auto m = oracle::random_model(7, 5, 4);
  Rng rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    const int i = static_cast<int>(rng.below(5));
    int j = static_cast<int>(rng.below(4));
    if (j >= i) ++j;
    const auto cw_ij = m.combined_weight(SourcePair::of(i, j));
    const auto cw_ji = m.combined_weight(SourcePair::of(j, i));
    CHECK(cw_ij == cw_ji);
    FeatureVector x(4);
    for (auto& v : x) v = rng.gaussian();
    CHECK(m.score(SourcePair::of(i, j), x) == m.score(SourcePair::of(j, i), x));
  }
}

TEST_CASE("score hand cases") {
  TransferModel m;
  m.dim = 1;
  m.feature_names = {"f0"};
  m.sources = {"a", "b"};
  m.w0 = {4.0};
  m.w = {{0.0}, {0.0}};
  CHECK(m.score(SourcePair::of(0, 1), FeatureVector{0.5}) == doctest::Approx(2.0));
  CHECK(m.score(SourcePair::of(0, 1), FeatureVector{0.0}) == 0.0);
}

TEST_CASE("score matches brute-force dot product on random inputs") {
  const auto m = oracle::random_model(23, 6, 5);
  Rng rng(24);
  for (int rep = 0; rep < 50; ++rep) {
    const int i = static_cast<int>(rng.below(6));
    int j = static_cast<int>(rng.below(5));
    if (j >= i) ++j;
    FeatureVector x(5);
    for (auto& v : x) v = rng.gaussian();
    const auto pair = SourcePair::of(i, j);
    double expect = 0.0;
    for (int t = 0; t < 5; ++t) {
      expect += (m.w0[t] + 0.5 * (m.w[pair.a][t] + m.w[pair.b][t])) * x[t];
    }
    CHECK(m.score(pair, x) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("score is linear in the feature vector") {
  const auto m = oracle::random_model(31, 3, 4);
  const auto pair = SourcePair::of(0, 2);
  Rng rng(32);
  for (int rep = 0; rep < 20; ++rep) {
    FeatureVector x(4), z(4), combo(4);
    const double alpha = rng.gaussian();
    const double beta = rng.gaussian();
    for (int t = 0; t < 4; ++t) {
      x[t] = rng.gaussian();
      z[t] = rng.gaussian();
      combo[t] = alpha * x[t] + beta * z[t];
    }
    const double lhs = m.score(pair, combo);
    const double rhs = alpha * m.score(pair, x) + beta * m.score(pair, z);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("score validates shapes and source indices") {
  const auto m = oracle::random_model(5, 3, 4);
  CHECK_THROWS_AS(m.score(SourcePair::of(0, 1), FeatureVector{1.0}), ValidationError);
  CHECK_THROWS_AS(m.score(SourcePair::of(0, 7), FeatureVector(4, 0.0)),
                  std::out_of_range);
  CHECK_THROWS_AS(m.combined_weight(SourcePair::of(0, 3)), std::out_of_range);
}

TEST_CASE("classify thresholds with boundary counted as match") {
  CHECK(classify(0.7, 0.5) == +1);
  CHECK(classify(0.3, 0.5) == -1);
  CHECK(classify(0.5, 0.5) == +1);
}

TEST_CASE("classify is nonincreasing in tau") {
  Rng rng(41);
  for (int rep = 0; rep < 100; ++rep) {
    const double s = rng.gaussian();
    const double t1 = rng.gaussian();
    const double t2 = t1 + std::fabs(rng.gaussian());
    CHECK(classify(s, t1) >= classify(s, t2));
  }
}

TEST_CASE("model JSON round trip is bit exact") {
  testutil::TempDir dir;
  auto m = oracle::random_model(55, 4, 6);
  m.lambda_a = 0.125;
  const auto path = dir.str("model.json");
  save_model(m, path);
  const TransferModel back = load_model(path);
  CHECK(back.dim == m.dim);
  CHECK(back.feature_names == m.feature_names);
  CHECK(back.sources == m.sources);
  CHECK(back.lambda_a == m.lambda_a);
  CHECK(back.w0 == m.w0);
  CHECK(back.w == m.w);
}

TEST_CASE("model file with wrong-length vector is rejected") {
  testutil::TempDir dir;
  auto m = oracle::random_model(56, 3, 2);
  const auto path = dir.str("model.json");
  save_model(m, path);
  auto text = testutil::slurp(path);
  // Truncate the first per-source vector from two entries to one.
  const auto pos = text.find("\"w\"");
  REQUIRE(pos != std::string::npos);
  const auto open = text.find('[', text.find('[', pos) + 1);
  const auto comma = text.find(',', open);
  const auto close = text.find(']', open);
  REQUIRE(comma < close);
  text.erase(comma, close - comma);
  testutil::spit(path, text);
  CHECK_THROWS_AS(load_model(path), ValidationError);
}

TEST_CASE("loading a missing model file is an I/O error") {
  testutil::TempDir dir;
  CHECK_THROWS_AS(load_model(dir.str("absent.json")), IoError);
}

TEST_CASE("model validate rejects inconsistent shapes") {
  auto m = oracle::random_model(57, 3, 2);
  m.w[1].push_back(0.0);
  CHECK_THROWS_AS(m.validate(), ValidationError);
  m = oracle::random_model(57, 3, 2);
  m.w0[0] = std::nan("");
  CHECK_THROWS_AS(m.validate(), ValidationError);
}

}  // TEST_SUITE
