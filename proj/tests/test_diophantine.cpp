#include "shrink/diophantine.hpp"
#include "shrink/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

namespace {

using shrink::BigInt;
using shrink::MetricMode;
using shrink::Rational;
using shrink::TorusAtomicMeasure;
using shrink::TorusPoint;

shrink::AtomicMeasure srw() {
  return shrink::AtomicMeasure::uniform(
      shrink::sanov_presentation(MetricMode::HyperbolicDisplacement).symmetric_generators());
}

TorusAtomicMeasure random_measure(shrink::CounterRng& rng, std::size_t atoms) {
  std::vector<TorusPoint> pts;
  std::vector<BigInt> raw;
  BigInt total = 0;
  for (std::size_t i = 0; i < atoms; ++i) {
    const long long qx = 2 + static_cast<long long>(rng.below(9));
    const long long qy = 2 + static_cast<long long>(rng.below(9));
    pts.push_back(TorusPoint::exact({Rational(static_cast<long long>(rng.below(qx)), qx),
                                     Rational(static_cast<long long>(rng.below(qy)), qy)}));
    raw.push_back(1 + static_cast<long long>(rng.below(5)));
    total += raw.back();
  }
  std::vector<Rational> w;
  for (const auto& r : raw) w.emplace_back(r, total);
  return TorusAtomicMeasure(std::move(pts), std::move(w));
}

// Independent oracle: |nu(P) - m(P)| over half-open boxes [lo, hi) whose
// sides sit at an atom coordinate, 0 or 1, each possibly shifted by eps.
// The supremum is approached as eps -> 0.
double shifted_box_oracle(const TorusAtomicMeasure& nu, double eps) {
  std::vector<double> xs, ys, w;
  std::set<double> cx{0.0, 1.0}, cy{0.0, 1.0};
  for (std::size_t j = 0; j < nu.size(); ++j) {
    const auto& rc = nu.point(j).rational_coords();
    xs.push_back(rc[0].convert_to<double>());
    ys.push_back(rc[1].convert_to<double>());
    w.push_back(nu.weight(j).convert_to<double>());
    cx.insert(xs.back());
    cy.insert(ys.back());
  }
  auto expand = [eps](const std::set<double>& s) {
    std::vector<double> out;
    for (double c : s) {
      out.push_back(c);
      if (c + eps <= 1.0) out.push_back(c + eps);
    }
    return out;
  };
  const auto ex = expand(cx), ey = expand(cy);
  double best = 0.0;
  for (double x0 : ex) {
    for (double x1 : ex) {
      if (x1 <= x0) continue;
      for (double y0 : ey) {
        for (double y1 : ey) {
          if (y1 <= y0) continue;
          double mass = 0.0;
          for (std::size_t j = 0; j < xs.size(); ++j) {
            if (xs[j] >= x0 && xs[j] < x1 && ys[j] >= y0 && ys[j] < y1) mass += w[j];
          }
          best = std::max(best, std::abs(mass - (x1 - x0) * (y1 - y0)));
        }
      }
    }
  }
  return best;
}

TEST(Diophantine, DiscrepancyMatchesShiftedBoxOracle) {
  shrink::CounterRng rng(99);
  for (int t = 0; t < 25; ++t) {
    const auto nu = random_measure(rng, 1 + rng.below(8));
    const auto d = shrink::discrepancy(nu);
    ASSERT_TRUE(d.exact.has_value());
    EXPECT_NEAR(d.value, shifted_box_oracle(nu, 1e-10), 1e-8) << t;
    shrink::DiscrepancyConfig cfg;
    cfg.threads = 3;
    EXPECT_EQ(*shrink::discrepancy(nu, cfg).exact, *d.exact);
  }
}

TEST(Diophantine, DiscrepancyFrozenValues) {
  const auto delta = shrink::discrepancy(TorusAtomicMeasure::point_mass(TorusPoint::exact({0, 0})));
  EXPECT_EQ(*delta.exact, Rational(1));
  EXPECT_FALSE(delta.attained);
  EXPECT_EQ(*shrink::discrepancy(TorusAtomicMeasure::uniform_grid(2)).exact, Rational(3, 4));
  for (int q = 3; q <= 7; ++q) {
    EXPECT_EQ(*shrink::discrepancy(TorusAtomicMeasure::uniform_grid(q)).exact,
              Rational(2 * q - 1, q * q))
        << q;
  }
}

TEST(Diophantine, RealModeDiscrepancyAgreesWithExact) {
  shrink::CounterRng rng(5);
  const auto exact = random_measure(rng, 7);
  std::vector<TorusPoint> pts;
  std::vector<Rational> w;
  for (std::size_t j = 0; j < exact.size(); ++j) {
    // Shift off the rational grid by far less than any gap between atoms.
    const auto& f = exact.point(j).fixed_coords();
    pts.push_back(TorusPoint::real({f[0] + 1, f[1] + 1}, 0x1p-120));
    w.push_back(exact.weight(j));
  }
  const TorusAtomicMeasure real(std::move(pts), std::move(w));
  EXPECT_FALSE(real.is_exact());
  EXPECT_NEAR(shrink::discrepancy(real).value, shrink::discrepancy(exact).value, 1e-12);
}

TEST(Diophantine, GridFallbackBracketsExactValue) {
  shrink::CounterRng rng(17);
  for (int t = 0; t < 10; ++t) {
    const auto nu = random_measure(rng, 6);
    const auto exact = shrink::discrepancy(nu);
    shrink::DiscrepancyConfig cfg;
    cfg.max_exact_atoms = 0;
    cfg.grid_cells = 64;
    const auto grid = shrink::discrepancy(nu, cfg);
    EXPECT_TRUE(grid.approximate);
    EXPECT_NEAR(grid.error_bound, 4.0 / 64, 1e-15);
    EXPECT_LE(grid.value, exact.value + 1e-12);
    EXPECT_GE(grid.value + grid.error_bound, exact.value - 1e-12);
  }
}

TEST(Diophantine, DiscrepancyRejectsOtherDimensions) {
  EXPECT_THROW(shrink::discrepancy(TorusAtomicMeasure::uniform_grid(2, 3)), shrink::DimensionMismatch);
}

TEST(Diophantine, MeasureConstructionValidates) {
  const auto a = TorusPoint::exact({Rational(1, 2), 0});
  EXPECT_THROW(TorusAtomicMeasure({a}, {Rational(1, 2)}), std::invalid_argument);
  EXPECT_THROW(TorusAtomicMeasure({}, {}), std::invalid_argument);
  const TorusAtomicMeasure merged({a, a}, {Rational(1, 2), Rational(1, 2)});
  EXPECT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged.weight(0), Rational(1));
}

// Independent oracle: the defining sum in long double.
std::complex<double> direct_fourier(const TorusAtomicMeasure& nu, const std::vector<long long>& b) {
  long double re = 0, im = 0;
  for (std::size_t j = 0; j < nu.size(); ++j) {
    long double phase = 0;
    for (std::size_t i = 0; i < b.size(); ++i) phase += b[i] * static_cast<long double>(nu.point(j).coord(i));
    const long double w = nu.weight(j).convert_to<long double>();
    re += w * std::cos(2 * std::numbers::pi_v<long double> * phase);
    im += w * std::sin(2 * std::numbers::pi_v<long double> * phase);
  }
  return {static_cast<double>(re), static_cast<double>(im)};
}

TEST(Diophantine, FourierCoefficientsMatchDirectSum) {
  const auto nu = shrink::walk_distribution(srw(), shrink::parse_point({"sqrt2-1", "sqrt3-1"}), 4);
  const auto table = shrink::fourier_table(nu, 6);
  for (long long b0 = -6; b0 <= 6; ++b0) {
    for (long long b1 = -6; b1 <= 6; ++b1) {
      const std::vector<long long> b = {b0, b1};
      const auto direct = direct_fourier(nu, b);
      EXPECT_NEAR(std::abs(shrink::fourier_coefficient(nu, b) - direct), 0.0, 1e-12);
      EXPECT_NEAR(table.at(b), std::abs(direct), 1e-12);
    }
  }
  EXPECT_NEAR(table.at({0, 0}), 1.0, 1e-15);
  const auto mf = shrink::max_fourier(table);
  EXPECT_NEAR(mf.value, table.at(mf.argmax), 0.0);
}

TEST(Diophantine, WalkDistributionIsAProbabilityMeasure) {
  // A generic point has one atom per reduced word of matching parity.
  const auto x = shrink::parse_point({"sqrt2-1", "sqrt3-1"});
  const std::size_t expected[] = {1, 4, 13, 40, 121};
  for (int k = 0; k <= 4; ++k) {
    const auto nu = shrink::walk_distribution(srw(), x, k);
    EXPECT_EQ(nu.size(), expected[k]);
    BigInt total = 0;
    for (std::size_t j = 0; j < nu.size(); ++j) total += nu.numerator(j);
    EXPECT_EQ(total, nu.denominator());
  }
}

TEST(Diophantine, RationalWalkIsTrappedOnPointsOfExactOrder) {
  // Points of exact order 21 in (Z/21)^2: 441 (1 - 1/9) (1 - 1/49) = 384.
  const auto nu = shrink::walk_distribution(srw(), shrink::parse_point({"1/3", "1/7"}), 9);
  EXPECT_EQ(nu.size(), 384u);
  for (const auto& p : nu.points()) {
    BigInt q = 1;
    for (const auto& c : p.rational_coords()) {
      q = boost::multiprecision::lcm(q, boost::multiprecision::denominator(c));
    }
    EXPECT_EQ(q, BigInt(21));
  }
}

TEST(Diophantine, RationalWalkDiscrepancyIsFrozen) {
  const Rational expected[] = {Rational(1),
                               Rational(13, 21),
                               Rational(55, 126),
                               Rational(229, 672),
                               Rational(251, 1008),
                               Rational(4661, 21504),
                               Rational(52427, 301056),
                               Rational(374021, 2408448),
                               Rational(1324717, 9633792)};
  const auto x = shrink::parse_point({"1/3", "1/7"});
  for (int k = 0; k <= 8; ++k) {
    const auto d = shrink::discrepancy(shrink::walk_distribution(srw(), x, k));
    EXPECT_EQ(*d.exact, expected[k]) << k;
    EXPECT_GE(d.value, 0.045);
  }
}

TEST(Diophantine, RealWalkFourierDecayIsFrozen) {
  const double expected[] = {0.734822131181201, 0.659639778804251, 0.499508030055536,
                             0.468565161639492, 0.33958008970432};
  const auto x = shrink::parse_point({"sqrt2-1", "sqrt3-1"});
  std::vector<double> ks, vs;
  for (int k = 4; k <= 8; ++k) {
    const double v = shrink::max_fourier(shrink::walk_distribution(srw(), x, k), 50).value;
    EXPECT_NEAR(v, expected[k - 4], 1e-10) << k;
    ks.push_back(k);
    vs.push_back(v);
  }
  EXPECT_LT(shrink::log_linear_slope(ks, vs), 0.0);
}

TEST(Diophantine, EtkBoundsTheDiscrepancy) {
  EXPECT_NEAR(shrink::etk_bound(TorusAtomicMeasure::point_mass(TorusPoint::exact({0, 0})), 1).value,
              20.25, 1e-12);
  shrink::CounterRng rng(3);
  for (int t = 0; t < 15; ++t) {
    const auto nu = random_measure(rng, 1 + rng.below(8));
    const double d = shrink::discrepancy(nu).value;
    for (const int B : {1, 4, 16}) {
      const auto etk = shrink::etk_bound(nu, B);
      EXPECT_DOUBLE_EQ(etk.constant, 2.25);
      EXPECT_NEAR(etk.value, 2.25 * (1.0 / B + etk.fourier_sum), 1e-12);
      EXPECT_GE(etk.value, d) << t << " " << B;
    }
  }
}

// Independent oracle: max over q of -log(max_i ||q x_i|| / q) / log q.
double diophantine_oracle(long double x0, long double x1, long q_max) {
  double best = -std::numeric_limits<double>::infinity();
  for (long q = 2; q <= q_max; ++q) {
    long double dist = 0;
    for (long double x : {x0, x1}) {
      const long double qx = q * x;
      dist = std::max(dist, std::abs(qx - std::round(qx)) / q);
    }
    best = std::max(best, static_cast<double>(-std::log(dist) / std::log(static_cast<long double>(q))));
  }
  return best;
}

TEST(Diophantine, DiophantineTypeMatchesOracle) {
  const auto v = shrink::diophantine_type(shrink::parse_point({"sqrt2-1", "sqrt3-1"}), 10000);
  EXPECT_NEAR(v.m_estimate, diophantine_oracle(std::sqrt(2.0L) - 1, std::sqrt(3.0L) - 1, 10000), 1e-9);
  EXPECT_NEAR(v.m_estimate, 2.28905674765025, 1e-9);
  ASSERT_FALSE(v.witnesses.empty());
  EXPECT_EQ(v.witnesses.back().q, 3);
  for (std::size_t i = 1; i < v.witnesses.size(); ++i) {
    EXPECT_GT(v.witnesses[i].q, v.witnesses[i - 1].q);
    EXPECT_GT(v.witnesses[i].exponent, v.witnesses[i - 1].exponent);
  }
  EXPECT_FALSE(v.rational_denominator.has_value());
  EXPECT_FALSE(v.resolution_limited);
}

TEST(Diophantine, DiophantineTypeOfRationalAndNearRationalPoints) {
  const auto r = shrink::diophantine_type(shrink::parse_point({"1/3", "1/7"}), 100);
  EXPECT_TRUE(std::isinf(r.m_estimate));
  EXPECT_EQ(*r.rational_denominator, BigInt(21));
  EXPECT_NE(r.summary().find("rational"), std::string::npos);
  EXPECT_TRUE(std::isinf(shrink::diophantine_type(shrink::parse_point({"1/2", "0"}), 100).m_estimate));
  const auto shifted = shrink::diophantine_type(
      TorusPoint::exact({Rational(1, 2) + Rational(1, 1000000000), 0}), 100);
  EXPECT_NEAR(shifted.m_estimate, -std::log(1e-9) / std::log(2.0), 1e-6);
}

TEST(Diophantine, FastApproximationProfile) {
  const auto p = shrink::sanov_presentation(MetricMode::HyperbolicDisplacement);
  const auto ball = shrink::enumerate_ball(p, 7);
  // The origin is fixed by every element.
  const auto origin = TorusPoint::exact({0, 0});
  const auto fixed = shrink::fast_approx_scan(ball, origin, origin);
  EXPECT_EQ(fixed.exact_hits, ball.size() - 1);
  const auto x = shrink::parse_point({"sqrt2-1", "sqrt3-1"});
  const auto prof = shrink::fast_approx_scan(ball, x, origin, 1000);
  ASSERT_TRUE(prof.verdict.has_value());
  EXPECT_EQ(prof.exact_hits, 0u);
  for (std::size_t n = 0; n < prof.keep_alpha.size(); ++n) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t k = n; k < prof.shell_best.size(); ++k) m = std::min(m, prof.shell_best[k]);
    EXPECT_EQ(prof.keep_alpha[n], m);
  }
  // Radius 0 is skipped and no element has radius 1 (#B_1 = #B_0 = 1).
  EXPECT_EQ(prof.shell_best[0], -std::numeric_limits<double>::infinity());
  EXPECT_EQ(prof.shell_best[1], -std::numeric_limits<double>::infinity());
  for (std::size_t n = 2; n < prof.shell_best.size(); ++n) EXPECT_TRUE(std::isfinite(prof.shell_best[n])) << n;
}

TEST(Diophantine, WalkBudgetIsEnforced) {
  try {
    shrink::walk_distribution(srw(), shrink::parse_point({"sqrt2-1", "sqrt3-1"}), 3, 10);
    FAIL() << "expected BudgetExceeded";
  } catch (const shrink::BudgetExceeded& e) {
    EXPECT_EQ(e.completed_radius(), 1);
  }
}

TEST(Diophantine, LogLinearSlope) {
  std::vector<double> xs, vs;
  for (int i = 0; i < 8; ++i) {
    xs.push_back(i);
    vs.push_back(3.0 * std::exp(-0.3 * i));
  }
  EXPECT_NEAR(shrink::log_linear_slope(xs, vs), -0.3, 1e-12);
}

}  // namespace
