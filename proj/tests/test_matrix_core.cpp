#include "shrink/matrix_core.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>

namespace {

using shrink::BigInt;
using shrink::GroupElement;
using shrink::MetricMode;

// Independent oracle: 2 log sigma_max from an SVD in double precision.
double svd_displacement(const GroupElement& g) {
  Eigen::Matrix2d m;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) m(i, j) = g.at(i, j).convert_to<double>();
  }
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(m);
  return 2.0 * std::log(svd.singularValues()(0));
}

TEST(MatrixCore, RejectsNonUnimodular) {
  EXPECT_THROW(GroupElement::from_rows({{2, 0}, {0, 1}}), shrink::NotUnimodular);
  EXPECT_THROW(GroupElement::from_rows({{1, 1}, {1, 1}}), shrink::NotUnimodular);
  EXPECT_NO_THROW(GroupElement::from_rows({{2, 1}, {1, 1}}));
}

TEST(MatrixCore, ComposeAndInverse) {
  const auto a = GroupElement::from_rows({{1, 2}, {0, 1}});
  const auto b = GroupElement::from_rows({{1, 0}, {2, 1}});
  const auto ab = shrink::compose(a, b);
  EXPECT_EQ(ab, GroupElement::from_rows({{5, 2}, {2, 1}}));
  EXPECT_TRUE(shrink::compose(ab, ab.inverse()).is_identity());
  EXPECT_EQ(ab.frobenius_sq(), BigInt(34));
  EXPECT_EQ(ab.trace(), BigInt(6));
}

TEST(MatrixCore, DisplacementOfGeneratorIsFrozen) {
  // 2 log(1 + sqrt 2) = 2 asinh(1).
  const auto iv = shrink::displacement(GroupElement::from_rows({{1, 2}, {0, 1}}));
  EXPECT_TRUE(iv.contains(1.7627471740390860505));
  EXPECT_LT(iv.width(), 1e-12);
}

TEST(MatrixCore, DisplacementMatchesSvdOracle) {
  const auto a = GroupElement::from_rows({{1, 2}, {0, 1}});
  const auto b = GroupElement::from_rows({{1, 0}, {2, 1}});
  GroupElement g = GroupElement::identity(2);
  const GroupElement steps[] = {a, b, a.inverse(), b, b, a, b.inverse(), a};
  for (const auto& s : steps) {
    g = shrink::compose(g, s);
    const auto iv = shrink::displacement(g);
    EXPECT_NEAR(iv.mid(), svd_displacement(g), 1e-9) << g.to_string();
  }
}

TEST(MatrixCore, IdentityHasZeroDisplacement) {
  const auto iv = shrink::displacement(GroupElement::identity(2));
  EXPECT_EQ(iv.lo, 0.0);
  EXPECT_EQ(iv.hi, 0.0);
}

TEST(MatrixCore, BallThresholdsAreFrozen) {
  // floor(e^n + e^-n) for n = 0..5.
  const long long expected[] = {2, 3, 7, 20, 54, 148};
  for (int n = 0; n <= 5; ++n) EXPECT_EQ(shrink::ball_threshold_floor(n), BigInt(expected[n]));
}

TEST(MatrixCore, MembershipAgreesWithDisplacement) {
  const auto a = GroupElement::from_rows({{1, 2}, {0, 1}});
  const auto b = GroupElement::from_rows({{1, 0}, {2, 1}});
  GroupElement g = GroupElement::identity(2);
  for (int i = 0; i < 12; ++i) {
    g = shrink::compose(g, i % 3 == 0 ? b : a);
    const double d = svd_displacement(g);
    const int r = shrink::minimal_radius(g.frobenius_sq());
    EXPECT_LE(d, r + 1e-9);
    EXPECT_GT(d, r - 1 - 1e-9);
    EXPECT_TRUE(shrink::ball_membership(g, r));
    if (r > 0) EXPECT_FALSE(shrink::ball_membership(g, r - 1));
  }
}

TEST(MatrixCore, WordsReduceAndEvaluate) {
  EXPECT_EQ(shrink::freely_reduce({1, 2, -2, -1, 2}), (shrink::Word{2}));
  EXPECT_EQ(shrink::invert_word({1, -2}), (shrink::Word{2, -1}));
  const auto p = shrink::sanov_presentation(MetricMode::HyperbolicDisplacement);
  EXPECT_EQ(p.evaluate({1, 2}), GroupElement::from_rows({{5, 2}, {2, 1}}));
  EXPECT_TRUE(p.evaluate({1, -1}).is_identity());
  EXPECT_EQ(p.symmetric_generators().size(), 4u);
}

TEST(MatrixCore, PresentationJsonRoundTrip) {
  const auto p = shrink::sanov_presentation(MetricMode::WordLength);
  const auto j = shrink::presentation_to_json(p);
  EXPECT_EQ(j["generators"][0][0][1], "2");
  const auto q = shrink::presentation_from_json(j);
  EXPECT_EQ(q.metric(), MetricMode::WordLength);
  EXPECT_TRUE(q.freeness_assumed());
  ASSERT_EQ(q.rank(), 2u);
  EXPECT_EQ(q.generators()[1], p.generators()[1]);
}

TEST(MatrixCore, PresentationJsonRejectsBadInput) {
  EXPECT_THROW(shrink::presentation_from_json({{"metric", "hyperbolic"}}), std::invalid_argument);
  nlohmann::json bad = {{"generators", {{{"1", "2"}, {"0"}}}}};
  EXPECT_THROW(shrink::presentation_from_json(bad), std::invalid_argument);
  nlohmann::json metric = {{"generators", {{{"1", "2"}, {"0", "1"}}}}, {"metric", "taxicab"}};
  EXPECT_THROW(shrink::presentation_from_json(metric), std::invalid_argument);
}

TEST(MatrixCore, HugeEntriesStayExact) {
  const auto a = GroupElement::from_rows({{1, 2}, {0, 1}});
  const auto b = GroupElement::from_rows({{1, 0}, {2, 1}});
  GroupElement g = GroupElement::identity(2);
  for (int i = 0; i < 200; ++i) g = shrink::compose(g, i % 2 ? a : b);
  EXPECT_EQ(shrink::determinant(2, g.entries()), BigInt(1));
  const auto iv = shrink::displacement(g);
  EXPECT_GT(iv.lo, 200.0);
  EXPECT_LE(iv.lo, iv.hi);
}

}  // namespace
