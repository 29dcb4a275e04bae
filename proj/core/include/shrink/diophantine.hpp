// Random-walk distributions nu_k = mu^{*k} * delta_x on the torus, their
// Fourier coefficients, box discrepancy, the Erdos-Turan-Koksma bound,
// Diophantine type of a point and fast-approximation exponent scans.
#pragma once

#include "shrink/group_enum.hpp"
#include "shrink/matrix_core.hpp"
#include "shrink/torus_action.hpp"

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace shrink {

/// Finitely supported probability measure on the torus. Weights are exact:
/// numerator(i) / denominator() with one common denominator.
class TorusAtomicMeasure {
 public:
  /// Merges duplicate atoms (exact coordinate equality in exact mode, the
  /// same 2^-47 cell in real mode) and sorts atoms by fixed-point
  /// coordinates. Throws on empty input, nonpositive weights, weights not
  /// summing to 1 or mixed dimensions.
  TorusAtomicMeasure(std::vector<TorusPoint> points, std::vector<Rational> weights);
  static TorusAtomicMeasure point_mass(TorusPoint x);
  /// Uniform measure on the grid (i/q, j/q, ...) in dimension d.
  static TorusAtomicMeasure uniform_grid(int q, std::size_t dim = 2);

  std::size_t size() const noexcept { return points_.size(); }
  std::size_t dim() const noexcept { return points_.front().dim(); }
  /// True when every atom has exact rational coordinates.
  bool is_exact() const noexcept { return exact_; }
  const std::vector<TorusPoint>& points() const noexcept { return points_; }
  const TorusPoint& point(std::size_t i) const { return points_.at(i); }
  const BigInt& numerator(std::size_t i) const { return numerators_.at(i); }
  const BigInt& denominator() const noexcept { return denominator_; }
  Rational weight(std::size_t i) const;
  double weight_double(std::size_t i) const;
  /// Largest coordinate error bound over the atoms (0 in exact mode).
  double max_error() const noexcept;

 private:
  struct Raw {};
  TorusAtomicMeasure(Raw, std::vector<TorusPoint> points, std::vector<BigInt> numerators,
                     BigInt denominator);
  friend TorusAtomicMeasure walk_distribution(const AtomicMeasure&, const TorusPoint&, int,
                                              std::size_t);

  std::vector<TorusPoint> points_;
  std::vector<BigInt> numerators_;
  BigInt denominator_;
  bool exact_ = true;
};

/// nu_k = mu^{*k} * delta_x by exact pushforward convolution. Throws
/// BudgetExceeded (completed step in completed_radius()) when the support
/// outgrows max_atoms.
TorusAtomicMeasure walk_distribution(const AtomicMeasure& mu, const TorusPoint& x, int steps,
                                     std::size_t max_atoms = 5'000'000);

/// sum_j w_j exp(2 pi i <b, x_j>), phases reduced exactly on the 2^-128 grid
/// and accumulated in long double.
std::complex<double> fourier_coefficient(const TorusAtomicMeasure& nu,
                                         const std::vector<long long>& b);

/// |nu^(b)| for every b with ||b||_inf <= B, row-major in b + (B, ..., B).
struct FourierTable {
  int window = 0;
  std::size_t dim = 0;
  std::vector<double> modulus;
  double at(const std::vector<long long>& b) const;
};

/// d = 2 uses a chunked matrix product of per-coordinate characters.
FourierTable fourier_table(const TorusAtomicMeasure& nu, int window, unsigned threads = 1);

struct MaxFourier {
  double value = 0.0;
  std::vector<long long> argmax;
};

/// max |nu^(b)| over 0 < ||b||_inf <= B.
MaxFourier max_fourier(const TorusAtomicMeasure& nu, int window, unsigned threads = 1);
MaxFourier max_fourier(const FourierTable& table);

// --- discrepancy ----------------------------------------------------------------

struct DiscrepancyConfig {
  /// Largest atom count for the exact corner search (d = 2).
  std::size_t max_exact_atoms = 5000;
  /// Grid cells per axis for the fallback.
  int grid_cells = 256;
  /// Workers for the corner search; the result does not depend on it.
  unsigned threads = 1;
};

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;
  /// Closed box (mass excess) or open box (mass deficit).
  bool closed = false;
};

struct DiscrepancyResult {
  /// Supremum of |nu(P) - m(P)| over half-open boxes (grid fallback: the
  /// grid-box value D_grid).
  double value = 0.0;
  /// Exact rational value when coordinates and weights allowed scaled
  /// integer arithmetic.
  std::optional<Rational> exact;
  /// Whether some half-open box attains the supremum (otherwise it is a
  /// limit of boxes shrinking onto or away from atoms).
  bool attained = false;
  /// Grid fallback used: the true value lies in [value, value + error_bound].
  bool approximate = false;
  double error_bound = 0.0;
  /// Optimal closed or open box (the limit box when not attained).
  Box witness;
};

/// Exact for d = 2 within the atom budget: the supremum of nu - m is a
/// limit of half-open boxes converging to a closed box with atom-coordinate
/// corners, and the supremum of m - nu is an open box with corners in the
/// atom coordinates and {0, 1}. Above the budget the grid fallback brackets
/// D_grid <= D <= D_grid + 2 d h. Throws DimensionMismatch for d != 2.
DiscrepancyResult discrepancy(const TorusAtomicMeasure& nu, const DiscrepancyConfig& cfg = {});

struct EtkBound {
  double value = 0.0;
  /// C_d = (3/2)^d.
  double constant = 0.0;
  int window = 0;
  /// sum over 0 < ||b||_inf <= B of |nu^(b)| / r(b), r(b) = prod max(1, |b_i|).
  double fourier_sum = 0.0;
};

/// C_d (1/B + sum_{0 < ||b||_inf <= B} |nu^(b)| / r(b)).
EtkBound etk_bound(const TorusAtomicMeasure& nu, int window, unsigned threads = 1);
EtkBound etk_bound(const FourierTable& table);

// --- Diophantine type --------------------------------------------------------------

struct DiophantineWitness {
  std::int64_t q = 0;
  /// max_i dist(x_i, (1/q) Z).
  double distance = 0.0;
  /// -log(distance) / log(q).
  double exponent = 0.0;
};

struct DiophantineVerdict {
  /// max over 2 <= q <= Q of -log(dist_sup(x, R_q)) / log q; infinite for
  /// rational points whose denominator is within the cutoff.
  double m_estimate = 0.0;
  std::int64_t cutoff = 0;
  /// Records where the running maximum increases, sorted by q.
  std::vector<DiophantineWitness> witnesses;
  /// Exact rational point: the lcm of its denominators.
  std::optional<BigInt> rational_denominator;
  /// Real-mode distances at or below the coordinate error bound.
  bool resolution_limited = false;
  std::string summary() const;
};

DiophantineVerdict diophantine_type(const TorusPoint& x, std::int64_t cutoff);

// --- fast approximation -----------------------------------------------------------

struct ApproximationProfile {
  /// shell_best[n]: largest exponent -log ||g.x - y|| / log ||g|| over g of
  /// radius n (-inf when the shell is empty, +inf on an exact hit).
  std::vector<double> shell_best;
  /// keep_alpha[n] = min over m in [n, R] of shell_best[m]: exponents at
  /// least this large keep appearing in every shell from n to R.
  std::vector<double> keep_alpha;
  /// Exact hits g.x == y.
  std::uint64_t exact_hits = 0;
  std::optional<DiophantineVerdict> verdict;
};

/// Exponents over the ball of radius max_radius (identity and elements
/// with ||g|| = 1 skipped). The verdict of x is attached for reference when
/// diophantine_cutoff > 0.
ApproximationProfile fast_approx_scan(const GroupPresentation& p, const TorusPoint& x,
                                      const TorusPoint& y, int max_radius,
                                      std::int64_t diophantine_cutoff = 0,
                                      const EnumerationConfig& cfg = {});
ApproximationProfile fast_approx_scan(const BallIndex& ball, const TorusPoint& x,
                                      const TorusPoint& y, std::int64_t diophantine_cutoff = 0);

/// Least-squares slope of log(values[i]) against xs[i] (positive values).
double log_linear_slope(const std::vector<double>& xs, const std::vector<double>& values);

}  // namespace shrink
