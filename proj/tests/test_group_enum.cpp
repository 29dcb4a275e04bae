#include "shrink/group_enum.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace {

using shrink::BigInt;
using shrink::GroupElement;
using shrink::MetricMode;

shrink::GroupPresentation sanov(MetricMode m = MetricMode::HyperbolicDisplacement) {
  return shrink::sanov_presentation(m);
}

// Independent oracle: the Sanov subgroup is exactly the set of integer
// matrices with det 1, a = d = 1 (mod 4) and b = c = 0 (mod 2). Counts all
// of them with a^2 + b^2 + c^2 + d^2 <= floor(e^n + e^-n).
std::vector<std::uint64_t> brute_force_sanov_counts(int radius) {
  std::vector<std::uint64_t> counts(radius + 1, 0);
  const long long top = shrink::ball_threshold_floor(radius).convert_to<long long>();
  const long long m = static_cast<long long>(std::sqrt(static_cast<double>(top))) + 1;
  auto mod = [](long long v, long long q) { return ((v % q) + q) % q; };
  for (long long a = -m; a <= m; ++a) {
    if (mod(a, 4) != 1) continue;
    for (long long b = -m; b <= m; b += 1) {
      if (mod(b, 2) != 0 || a * a + b * b > top) continue;
      for (long long c = -m; c <= m; ++c) {
        if (mod(c, 2) != 0 || a * a + b * b + c * c > top) continue;
        // a d - b c = 1 with a != 0 (a = 1 mod 4).
        const long long num = 1 + b * c;
        if (num % a != 0) continue;
        const long long d = num / a;
        if (mod(d, 4) != 1) continue;
        const long long f = a * a + b * b + c * c + d * d;
        for (int n = 0; n <= radius; ++n) {
          if (f <= shrink::ball_threshold_floor(n).convert_to<long long>()) ++counts[n];
        }
      }
    }
  }
  return counts;
}

TEST(GroupEnum, HyperbolicBallMatchesCongruenceOracle) {
  const auto ball = shrink::enumerate_ball(sanov(), 8);
  EXPECT_EQ(ball.counts(), brute_force_sanov_counts(8));
}

TEST(GroupEnum, HyperbolicCountsAreFrozen) {
  const std::vector<std::uint64_t> expected = {1, 1, 5, 13, 25, 73, 221, 533, 1473, 4037, 11069};
  EXPECT_EQ(shrink::enumerate_ball(sanov(), 10).counts(), expected);
}

TEST(GroupEnum, WordBallIsFreeGroupBall) {
  const auto ball = shrink::enumerate_ball(sanov(MetricMode::WordLength), 7);
  for (int n = 0; n <= 7; ++n) {
    // 1 + 4 (3^n - 1) / 2 reduced words of length <= n.
    std::uint64_t p = 1;
    for (int i = 0; i < n; ++i) p *= 3;
    EXPECT_EQ(ball.counts()[n], 1 + 2 * (p - 1)) << n;
  }
}

TEST(GroupEnum, ElementsAreDistinctAndSorted) {
  const auto ball = shrink::enumerate_ball(sanov(), 7);
  std::set<std::string> seen;
  int last_radius = 0;
  for (const auto& e : ball.elements()) {
    EXPECT_TRUE(seen.insert(e.element.to_string()).second);
    EXPECT_GE(e.radius, last_radius);
    last_radius = e.radius;
    EXPECT_TRUE(shrink::ball_membership(e.element, e.radius));
    ASSERT_TRUE(ball.find(e.element).has_value());
  }
  EXPECT_FALSE(ball.find(GroupElement::from_rows({{1, 1}, {0, 1}})).has_value());
}

TEST(GroupEnum, ThreadCountDoesNotChangeTheBall) {
  const auto one = shrink::enumerate_ball(sanov(), 8, {10'000'000, 1, {}});
  const auto four = shrink::enumerate_ball(sanov(), 8, {10'000'000, 4, {}});
  ASSERT_EQ(one.size(), four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one.elements()[i].element, four.elements()[i].element);
  }
}

TEST(GroupEnum, BudgetExceededReportsPartialCounts) {
  try {
    shrink::enumerate_ball(sanov(), 12, {1000, 1, {}});
    FAIL() << "expected BudgetExceeded";
  } catch (const shrink::BudgetExceeded& e) {
    EXPECT_EQ(e.completed_radius(), 7);
    ASSERT_EQ(e.partial_counts().size(), 8u);
    EXPECT_EQ(e.partial_counts().back(), 533u);
  }
}

TEST(GroupEnum, ShellsPartitionTheBall) {
  const auto ball = shrink::enumerate_ball(sanov(), 9);
  const auto rep = shrink::shells(ball, 2);
  std::size_t total = 0;
  for (const auto& s : rep.shells) {
    total += s.size();
    EXPECT_TRUE(s.measure().is_symmetric());
    for (const auto& g : s.atoms()) EXPECT_FALSE(g.is_identity());
  }
  EXPECT_EQ(total + 1, ball.size());
}

TEST(GroupEnum, GrowthFitRecoversExactExponential) {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 1, sphere = 4;
  counts.push_back(1);
  for (int n = 1; n <= 12; ++n) {
    total += sphere;
    counts.push_back(total);
    sphere *= 3;
  }
  const auto fit = shrink::fit_critical_exponent(counts);
  EXPECT_NEAR(fit.delta, std::log(3.0), 1e-12);
  EXPECT_TRUE(fit.used_increments);
  EXPECT_THROW(shrink::fit_critical_exponent({1, 2, 3}), std::invalid_argument);
}

// Independent oracle: closed walks of the simple random walk on the 4-regular
// tree, by dynamic programming on the distance to the root.
std::vector<BigInt> tree_return_counts(int K) {
  std::vector<BigInt> out;
  std::vector<BigInt> at(2 * K + 2, 0);
  at[0] = 1;
  for (int t = 1; t <= 2 * K; ++t) {
    std::vector<BigInt> next(at.size(), 0);
    for (std::size_t L = 0; L + 1 < at.size(); ++L) {
      if (at[L] == 0) continue;
      if (L == 0) {
        next[1] += at[0] * 4;
      } else {
        next[L - 1] += at[L];
        next[L + 1] += at[L] * 3;
      }
    }
    at = next;
    if (t % 2 == 0) out.push_back(at[0]);
  }
  return out;
}

TEST(GroupEnum, SimpleRandomWalkReturnsMatchTreeOracle) {
  const auto mu = shrink::AtomicMeasure::uniform(sanov().symmetric_generators());
  const auto rp = shrink::return_prob_norm_estimate(mu, 6);
  const auto oracle = tree_return_counts(6);
  ASSERT_EQ(rp.r.size(), 6u);
  for (int k = 1; k <= 6; ++k) {
    const shrink::Rational p(rp.numerators[k - 1], rp.denominators[k - 1]);
    BigInt paths = 1;
    for (int i = 0; i < 2 * k; ++i) paths *= 4;
    EXPECT_EQ(p, shrink::Rational(oracle[k - 1], paths)) << k;
  }
  EXPECT_DOUBLE_EQ(rp.r[0], 0.5);
  EXPECT_TRUE(shrink::is_power_mean_monotone(rp));
}

TEST(GroupEnum, ReturnEstimatesIncreaseTowardTheNorm) {
  const auto mu = shrink::AtomicMeasure::uniform(sanov().symmetric_generators());
  const auto rp = shrink::return_prob_norm_estimate(mu, 8);
  for (std::size_t k = 1; k < rp.r.size(); ++k) EXPECT_GT(rp.r[k], rp.r[k - 1]);
  EXPECT_NEAR(rp.r.back(), 0.715527, 1e-6);
  EXPECT_LT(rp.r.back(), std::sqrt(3.0) / 2);
}

TEST(GroupEnum, MeasuresValidateTheirInput) {
  const auto a = GroupElement::from_rows({{1, 2}, {0, 1}});
  EXPECT_THROW(shrink::AtomicMeasure({a}, {shrink::Rational(1, 2)}), std::invalid_argument);
  EXPECT_FALSE(shrink::AtomicMeasure::point_mass(a).is_symmetric());
  EXPECT_TRUE(shrink::AtomicMeasure::uniform({a, a.inverse()}).is_symmetric());
}

TEST(GroupEnum, DriftEstimateIsSeededAndPlausible) {
  const auto ball = shrink::enumerate_ball(sanov(MetricMode::WordLength), 1);
  const auto shell = shrink::shell_at(ball, 1, 1);
  ASSERT_TRUE(shell.has_value());
  const auto a = shrink::drift_entropy_estimate(*shell, 40, 2000, 17, 20);
  const auto b = shrink::drift_entropy_estimate(*shell, 40, 2000, 17, 20);
  EXPECT_EQ(a.drift, b.drift);
  EXPECT_EQ(a.entropy, b.entropy);
  // Simple random walk on F_2 escapes at rate 1/2 in the word metric.
  EXPECT_NEAR(a.drift, 0.5, 6 * a.drift_se + 0.02);
}

}  // namespace
