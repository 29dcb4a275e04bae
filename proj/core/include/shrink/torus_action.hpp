// The action of SL_d(Z) on the torus R^d / Z^d, shrinking-target counting
// and the exact ergodic character error.
//
// Real-mode coordinates are 128-bit fixed point, x = X / 2^128. The map
// X -> g X mod 2^128 is exactly the torus action on the fixed-point grid, so
// orbit points never lose bits to reduction mod 1; the only error is the
// representation error of the starting point, carried as an explicit bound.
#pragma once

#include "shrink/group_enum.hpp"
#include "shrink/matrix_core.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace shrink {

using u128 = unsigned __int128;

/// x / 2^128 as a double.
double fixed_to_double(u128 x) noexcept;
/// Nearest fixed-point value to a double in [0, 1) (reduced mod 1).
u128 double_to_fixed(double x) noexcept;
/// g_ij reduced mod 2^128 (two's complement).
u128 bigint_mod_2_128(const BigInt& v);

class TorusPoint {
 public:
  enum class Mode { Exact, Real };

  /// Rational coordinates, reduced into [0, 1).
  static TorusPoint exact(std::vector<Rational> coords);
  /// Fixed-point coordinates with an absolute error bound per coordinate.
  static TorusPoint real(std::vector<u128> coords, double error = 0x1p-128);
  static TorusPoint from_doubles(const std::vector<double>& coords);

  Mode mode() const noexcept { return mode_; }
  bool is_exact() const noexcept { return mode_ == Mode::Exact; }
  std::size_t dim() const noexcept { return fixed_.size(); }
  /// Exact coordinates (exact mode only).
  const std::vector<Rational>& rational_coords() const;
  /// Fixed-point coordinates; in exact mode the nearest grid point.
  const std::vector<u128>& fixed_coords() const noexcept { return fixed_; }
  /// Absolute coordinate error bound (0 in exact mode).
  double error() const noexcept { return error_; }
  double coord(std::size_t i) const noexcept { return fixed_to_double(fixed_[i]); }
  std::string to_string() const;

 private:
  TorusPoint(Mode mode, std::vector<Rational> rational, std::vector<u128> fixed,
             double error);

  Mode mode_;
  std::vector<Rational> rational_;
  std::vector<u128> fixed_;
  double error_;
};

/// Parses "1/3", "0.25", "sqrt2-1", "(sqrt5-1)/2", "-sqrt3+2". Rational
/// literals give exact coordinates; square roots are evaluated to 128 bits.
struct CoordinateLiteral {
  bool exact = true;
  Rational rational = 0;
  u128 fixed = 0;
  double error = 0.0;
};
CoordinateLiteral parse_coordinate(const std::string& literal);
/// Exact if every coordinate is rational, real otherwise.
TorusPoint parse_point(const std::vector<std::string>& literals);

/// g.x mod 1; exact in rational mode.
TorusPoint act(const GroupElement& g, const TorusPoint& x);

enum class TorusNorm { Euclidean, Sup };

/// Distance on R^d / Z^d, minimised over integer translates.
double torus_dist(const TorusPoint& x, const TorusPoint& y, TorusNorm norm);

// --- targets and psi -----------------------------------------------------------

enum class TargetKind { EuclideanBall, SupBox, Annulus };

/// A monotone family Targ_r around a center y.
struct TargetFamily {
  TargetKind kind = TargetKind::EuclideanBall;
  TorusPoint center = TorusPoint::exact({0, 0});
  /// Annulus inner radius; Targ_r = {rho0 <= |z - y| < sqrt(rho0^2 + r^2)}.
  double inner_radius = 0.0;
  /// Sup boxes: side sqrt(pi) r (measure pi r^2) instead of side r.
  bool comparable_to_ball = false;

  /// Lebesgue measure of Targ_r in dimension 2.
  double measure(double r) const;
};

/// psi(R) = R^{-a} (log R)^b.
struct PsiSpec {
  double a = 0.0;
  double b = 0.0;
  /// Whether psi is evaluated at norm R (b != 0 needs log R > 0: R >= 2).
  bool defined_at(double log_norm) const;
  double log_value(double log_norm) const;
};

enum class PsiRegime { Finite, Infinite, Gap };
std::string to_string(PsiRegime r);

/// Closed-form classification of the two series conditions for
/// psi = R^{-a} log^b R against delta; equality a == delta within tol.
PsiRegime classify_psi(const PsiSpec& psi, double delta, double tol = 1e-12);

// --- shrinking-target search -----------------------------------------------------

struct ShrinkConfig {
  /// Hits with |dist - radius| below max(tolerance, error bound) are borderline.
  double borderline_tolerance = 1e-10;
  /// Shell width for the per-radius "a solution exists in (n-k, n]" flags.
  int shell_width = 2;
  /// Keep the witness list (large for slowly shrinking psi).
  bool keep_witnesses = true;
  unsigned threads = 1;
};

struct Witness {
  std::size_t element_index = 0;  // position in the BallIndex
  GroupElement element;
  Interval displacement;
  double distance = 0.0;
  double target_radius = 0.0;
};

struct ShrinkResult {
  /// counts[n] = N(n) = #solutions with d(g, e) <= n.
  std::vector<std::uint64_t> counts;
  /// new_in_shell[n] = N(n) - N(n - 1).
  std::vector<std::uint64_t> new_in_shell;
  /// has_solution_in_shell[n]: some solution has radius in (n - k, n].
  std::vector<bool> has_solution_in_shell;
  std::vector<Witness> witnesses;
  std::vector<Witness> borderline;
};

/// Tests g.x in Targ_{psi(||g||)} for every g in the ball (||g|| = sigma_max).
ShrinkResult solve_shrinking_target(const BallIndex& ball, const TorusPoint& x,
                                    const TargetFamily& target, const PsiSpec& psi,
                                    const ShrinkConfig& cfg = {});
ShrinkResult solve_shrinking_target(const GroupPresentation& p, const TorusPoint& x,
                                    const TargetFamily& target, const PsiSpec& psi,
                                    int max_radius, const ShrinkConfig& cfg = {});

/// Counts for several exponents alpha (psi = R^{-alpha}) in one pass over
/// the ball: table[i][n] = N(n, alphas[i]).
struct ExponentScan {
  std::vector<double> alphas;
  std::vector<std::vector<std::uint64_t>> counts;
  std::vector<std::vector<std::uint64_t>> borderline;
};
ExponentScan exponent_scan(const BallIndex& ball, const TorusPoint& x, const TorusPoint& y,
                           const std::vector<double>& alphas, const ShrinkConfig& cfg = {});

/// Precomputed ball for many starting points: matrices mod 2^128, row l1
/// norms and log norms.
class FixedPointBall {
 public:
  explicit FixedPointBall(const BallIndex& ball);
  std::size_t size() const noexcept { return radius_.size(); }
  /// Counts for psi = R^{-alpha} and a Euclidean ball target around y.
  ExponentScan scan(const TorusPoint& x, const TorusPoint& y,
                    const std::vector<double>& alphas, double borderline_tolerance) const;

 private:
  int max_radius_;
  std::vector<std::array<u128, 4>> mod_;
  std::vector<double> row_l1_;
  std::vector<Interval> log_norm_;
  std::vector<int> radius_;
};

/// ||A_n e_b||_2^2 = #{(g,h) in S x S : g^T b = h^T b} / |S|^2, exact.
Rational ergodic_character_error(const ShellMeasure& s, const std::vector<BigInt>& b);

struct CharacterErrorSample {
  /// Fraction of sampled pairs (g, h) with g^T b = h^T b.
  double estimate = 0.0;
  /// Binomial standard error of the estimate.
  double std_error = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
};

/// Monte Carlo estimate of ||A_n e_b||_2^2 from uniformly sampled atom pairs.
CharacterErrorSample ergodic_character_error_mc(const ShellMeasure& s,
                                               const std::vector<BigInt>& b,
                                               std::uint64_t samples, std::uint64_t seed);

}  // namespace shrink
