#include "shrink/random.hpp"
#include "shrink/torus_action.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <map>

namespace {

using shrink::BigInt;
using shrink::GroupElement;
using shrink::MetricMode;
using shrink::Rational;
using shrink::TorusPoint;

const shrink::BallIndex& sanov_ball(int radius) {
  static std::map<int, shrink::BallIndex> cache;
  auto it = cache.find(radius);
  if (it == cache.end()) {
    it = cache.emplace(radius, shrink::enumerate_ball(
                                   shrink::sanov_presentation(MetricMode::HyperbolicDisplacement),
                                   radius)).first;
  }
  return it->second;
}

Rational frac(const Rational& q) {
  const BigInt n = boost::multiprecision::numerator(q);
  const BigInt d = boost::multiprecision::denominator(q);
  BigInt r = n % d;
  if (r < 0) r += d;
  return Rational(r, d);
}

TEST(TorusAction, ExactActionMatchesHandComputation) {
  const auto g = GroupElement::from_rows({{5, 2}, {2, 1}});
  const auto x = TorusPoint::exact({Rational(1, 3), Rational(5, 7)});
  const auto y = shrink::act(g, x);
  ASSERT_TRUE(y.is_exact());
  EXPECT_EQ(y.rational_coords()[0], frac(Rational(5, 3) + Rational(10, 7)));
  EXPECT_EQ(y.rational_coords()[1], frac(Rational(2, 3) + Rational(5, 7)));
}

TEST(TorusAction, ActionIsAHomomorphism) {
  shrink::CounterRng rng(11);
  const auto& ball = sanov_ball(6);
  for (int t = 0; t < 200; ++t) {
    const auto& g = ball.elements()[rng.below(ball.size())].element;
    const auto& h = ball.elements()[rng.below(ball.size())].element;
    const auto x = TorusPoint::exact({Rational(rng.below(1000), 997), Rational(rng.below(1000), 991)});
    const auto lhs = shrink::act(shrink::compose(g, h), x);
    const auto rhs = shrink::act(g, shrink::act(h, x));
    EXPECT_EQ(lhs.rational_coords(), rhs.rational_coords());
    const auto xr = TorusPoint::real({rng.bits128(), rng.bits128()});
    EXPECT_EQ(shrink::act(shrink::compose(g, h), xr).fixed_coords(),
              shrink::act(g, shrink::act(h, xr)).fixed_coords());
  }
}

TEST(TorusAction, RealModeTracksExactMode) {
  const auto g = GroupElement::from_rows({{33, 16}, {2, 1}});
  const auto xe = TorusPoint::exact({Rational(1, 3), Rational(1, 7)});
  const auto xr = TorusPoint::real(xe.fixed_coords(), 0x1p-127);
  const auto ye = shrink::act(g, xe);
  const auto yr = shrink::act(g, xr);
  EXPECT_GT(yr.error(), 0.0);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(yr.coord(i), ye.rational_coords()[i].convert_to<double>(), 1e-15);
  }
}

TEST(TorusAction, ParsesCoordinateLiterals) {
  const auto third = shrink::parse_coordinate("1/3");
  EXPECT_TRUE(third.exact);
  EXPECT_EQ(third.rational, Rational(1, 3));
  EXPECT_EQ(shrink::parse_coordinate("0.25").rational, Rational(1, 4));
  const auto s = shrink::parse_coordinate("sqrt2-1");
  EXPECT_FALSE(s.exact);
  EXPECT_NEAR(shrink::fixed_to_double(s.fixed), 0.41421356237309504880, 1e-16);
  EXPECT_LT(s.error, 1e-30);
  EXPECT_NEAR(shrink::fixed_to_double(shrink::parse_coordinate("(sqrt5-1)/2").fixed),
              0.61803398874989484820, 1e-16);
  EXPECT_NEAR(shrink::fixed_to_double(shrink::parse_coordinate("-sqrt3+2").fixed),
              0.26794919243112270647, 1e-16);
  EXPECT_THROW(shrink::parse_coordinate("pi"), std::invalid_argument);
  EXPECT_THROW(shrink::parse_coordinate("1/0"), std::invalid_argument);
  EXPECT_TRUE(shrink::parse_point({"1/2", "0"}).is_exact());
  EXPECT_FALSE(shrink::parse_point({"1/2", "sqrt2"}).is_exact());
}

TEST(TorusAction, TorusDistanceWrapsAround) {
  const auto a = TorusPoint::exact({Rational(1, 10), Rational(9, 10)});
  const auto b = TorusPoint::exact({Rational(9, 10), Rational(1, 10)});
  EXPECT_NEAR(shrink::torus_dist(a, b, shrink::TorusNorm::Euclidean), std::sqrt(0.08), 1e-15);
  EXPECT_NEAR(shrink::torus_dist(a, b, shrink::TorusNorm::Sup), 0.2, 1e-15);
  const auto ar = TorusPoint::from_doubles({0.1, 0.9});
  const auto br = TorusPoint::from_doubles({0.9, 0.1});
  EXPECT_NEAR(shrink::torus_dist(ar, br, shrink::TorusNorm::Sup), 0.2, 1e-15);
}

TEST(TorusAction, PsiClassification) {
  using shrink::PsiRegime;
  EXPECT_EQ(shrink::classify_psi({1.2, 0}, 1.0), PsiRegime::Finite);
  EXPECT_EQ(shrink::classify_psi({0.8, 0}, 1.0), PsiRegime::Infinite);
  EXPECT_EQ(shrink::classify_psi({1.0, -1}, 1.0), PsiRegime::Finite);
  EXPECT_EQ(shrink::classify_psi({1.0, 3}, 1.0), PsiRegime::Infinite);
  EXPECT_EQ(shrink::classify_psi({1.0, 1}, 1.0), PsiRegime::Gap);
  EXPECT_THROW(shrink::classify_psi({-1.0, 0}, 1.0), std::invalid_argument);
}

// Independent oracle: sigma_max from an SVD and g x mod 1 in long double.
std::vector<std::uint64_t> brute_force_hits(const shrink::BallIndex& ball, double x0, double x1,
                                            double y0, double y1, double alpha) {
  std::vector<std::uint64_t> hits(ball.radius() + 1, 0);
  for (const auto& e : ball.elements()) {
    Eigen::Matrix2d m;
    long double a[2][2];
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        m(i, j) = e.element.at(i, j).convert_to<double>();
        a[i][j] = e.element.at(i, j).convert_to<long double>();
      }
    }
    const double sigma = Eigen::JacobiSVD<Eigen::Matrix2d>(m).singularValues()(0);
    const double radius = std::pow(sigma, -alpha);
    long double z0 = a[0][0] * x0 + a[0][1] * x1;
    long double z1 = a[1][0] * x0 + a[1][1] * x1;
    auto wrap = [](long double v) {
      v -= std::floor(v);
      return static_cast<double>(std::min(v, 1 - v));
    };
    const double d0 = wrap(z0 - y0), d1 = wrap(z1 - y1);
    if (std::sqrt(d0 * d0 + d1 * d1) < radius) {
      for (int n = e.radius; n <= ball.radius(); ++n) ++hits[n];
    }
  }
  return hits;
}

TEST(TorusAction, ShrinkingTargetMatchesBruteForce) {
  const auto& ball = sanov_ball(7);
  const double x0 = 0.3183098861837907, x1 = 0.5772156649015329;
  const double y0 = 0.1, y1 = 0.2;
  for (const double alpha : {0.0, 0.25, 0.5, 1.0}) {
    shrink::TargetFamily target;
    target.center = TorusPoint::from_doubles({y0, y1});
    const auto res = shrink::solve_shrinking_target(
        ball, TorusPoint::from_doubles({x0, x1}), target, {alpha, 0.0});
    ASSERT_TRUE(res.borderline.empty()) << alpha;
    EXPECT_EQ(res.counts, brute_force_hits(ball, x0, x1, y0, y1, alpha)) << alpha;
    EXPECT_EQ(res.witnesses.size(), res.counts.back());
  }
}

TEST(TorusAction, ExponentScanAgreesWithSolverAndFixedPointBall) {
  const auto& ball = sanov_ball(8);
  const auto x = shrink::parse_point({"sqrt2-1", "sqrt3-1"});
  const auto y = TorusPoint::exact({0, 0});
  const std::vector<double> alphas = {0.25, 0.5, 1.0, 1.5};
  const auto scan = shrink::exponent_scan(ball, x, y, alphas);
  const shrink::FixedPointBall fpb(ball);
  EXPECT_EQ(fpb.size(), ball.size());
  const auto fast = fpb.scan(x, y, alphas, 1e-10);
  EXPECT_EQ(scan.counts, fast.counts);
  EXPECT_EQ(scan.borderline, fast.borderline);
  shrink::TargetFamily target;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const auto res = shrink::solve_shrinking_target(ball, x, target, {alphas[i], 0.0});
    EXPECT_EQ(res.counts, scan.counts[i]) << alphas[i];
    // Counts are monotone in the radius and in the exponent.
    for (int n = 1; n <= 8; ++n) EXPECT_GE(scan.counts[i][n], scan.counts[i][n - 1]);
    if (i > 0) {
      for (int n = 0; n <= 8; ++n) EXPECT_LE(scan.counts[i][n], scan.counts[i - 1][n]);
    }
  }
}

TEST(TorusAction, TargetsAreNested) {
  const auto& ball = sanov_ball(7);
  const auto x = shrink::parse_point({"sqrt2-1", "sqrt3-1"});
  shrink::TargetFamily ballt, box, annulus;
  box.kind = shrink::TargetKind::SupBox;
  annulus.kind = shrink::TargetKind::Annulus;
  annulus.inner_radius = 0.05;
  const shrink::PsiSpec psi{0.5, 0.0};
  const auto rb = shrink::solve_shrinking_target(ball, x, ballt, psi);
  const auto rx = shrink::solve_shrinking_target(ball, x, box, psi);
  const auto ra = shrink::solve_shrinking_target(ball, x, annulus, psi);
  // The box of side r sits inside the disc of radius r.
  EXPECT_LE(rx.counts.back(), rb.counts.back());
  EXPECT_GT(ra.counts.back(), 0u);
  EXPECT_NEAR(box.measure(0.1), 0.01, 1e-15);
  EXPECT_NEAR(annulus.measure(0.1), std::numbers::pi * 0.01, 1e-15);
}

// Independent oracle: direct O(N^2) loop over pairs of atoms.
Rational pair_loop(const shrink::ShellMeasure& s, const std::vector<BigInt>& b) {
  auto image = [&](const GroupElement& g) {
    return std::pair<BigInt, BigInt>{g.at(0, 0) * b[0] + g.at(1, 0) * b[1],
                                     g.at(0, 1) * b[0] + g.at(1, 1) * b[1]};
  };
  std::uint64_t equal = 0;
  for (const auto& g : s.atoms()) {
    const auto ig = image(g);
    for (const auto& h : s.atoms()) equal += image(h) == ig;
  }
  const std::uint64_t n = s.size();
  return Rational(BigInt(equal), BigInt(n) * n);
}

TEST(TorusAction, CharacterErrorMatchesPairLoop) {
  const auto& ball = sanov_ball(8);
  for (int n = 2; n <= 8; ++n) {
    const auto shell = shrink::shell_at(ball, n, 2);
    ASSERT_TRUE(shell.has_value());
    for (const auto& b : {std::vector<BigInt>{1, 0}, std::vector<BigInt>{1, 1},
                          std::vector<BigInt>{2, -3}}) {
      EXPECT_EQ(shrink::ergodic_character_error(*shell, b), pair_loop(*shell, b)) << n;
    }
  }
}

TEST(TorusAction, CharacterErrorMonteCarloWithinFourSigma) {
  const auto& ball = sanov_ball(8);
  const auto shell = shrink::shell_at(ball, 6, 2);
  ASSERT_TRUE(shell.has_value());
  const std::vector<BigInt> b = {1, 0};
  const double exact = shrink::ergodic_character_error(*shell, b).convert_to<double>();
  const auto mc = shrink::ergodic_character_error_mc(*shell, b, 200000, 5);
  const auto again = shrink::ergodic_character_error_mc(*shell, b, 200000, 5);
  EXPECT_EQ(mc.estimate, again.estimate);
  EXPECT_NEAR(mc.estimate, exact, 4 * mc.std_error);
}

TEST(TorusAction, DimensionMismatchIsReported) {
  const auto& ball = sanov_ball(2);
  shrink::TargetFamily target;
  EXPECT_THROW(shrink::solve_shrinking_target(ball, TorusPoint::exact({0, 0, 0}), target, {1, 0}),
               shrink::DimensionMismatch);
}

}  // namespace
