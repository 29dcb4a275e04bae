// The free group F_m with its word metric: a (2m)-regular tree whose
// boundary is the space of infinite reduced words. Shadows are cylinders,
// the Patterson-Sullivan measure is the uniform cylinder measure and every
// quantity below is exact.
#pragma once

#include "shrink/group_enum.hpp"
#include "shrink/matrix_core.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace shrink::tree {

struct BoundaryModel {
  explicit BoundaryModel(int rank, int busemann_slack = 0);

  int rank;
  /// Half-window R of the X_a sets; 0 is exact in a tree.
  int busemann_slack;
  // Quasiruler and hyperbolicity constants, all trivial in a tree.
  int shadow_constant = 0;
  int quasiruler_lambda = 1;
  int quasiruler_c = 0;
  int quasiruler_tau = 0;
  int thinness = 0;

  /// 2m - 1, the branching number.
  int branching() const noexcept { return 2 * rank - 1; }
  /// Critical exponent log(2m - 1).
  double delta() const;
  /// #S_n = 2m (2m-1)^{n-1} for n >= 1, 1 for n == 0.
  BigInt sphere_size(int n) const;
};

/// Common-prefix length, which equals (u|v)_e in the tree.
int gromov_product(const Word& u, const Word& v);

/// beta_g(h, e) = d(g, h) - d(g, e) = |h| - 2 (g|h).
int busemann(const Word& g, const Word& h);

/// Cylinder of boundary points starting with a nonempty reduced prefix.
class CylinderShadow {
 public:
  explicit CylinderShadow(Word prefix);
  const Word& prefix() const noexcept { return prefix_; }
  int length() const noexcept { return static_cast<int>(prefix_.size()); }

 private:
  Word prefix_;
};

/// rho(O(g)) = (2m)^{-1} (2m-1)^{-(|g|-1)}.
Rational ps_measure(const BoundaryModel& model, const CylinderShadow& c);

/// Reduced words of length n over letters +-1..+-m, in lexicographic order
/// of the signed indices.
std::vector<Word> sphere(const BoundaryModel& model, int n);

struct SphereCensus {
  /// counts[L] = number of reduced words of length L.
  std::vector<std::uint64_t> counts;
  /// Exact total cylinder measure of each sphere (L >= 1).
  std::vector<Rational> cylinder_sums;
};

/// Depth-first walk over all reduced words of length <= n_max.
SphereCensus sphere_census(const BoundaryModel& model, int n_max);

/// {h in S_n : n - 2a - R < -beta_g(h, e) <= n - 2a}. Requires |g| > n.
std::vector<Word> x_a_set(const BoundaryModel& model, const Word& g, int n, int a);

/// Sum over j of rho(O(g) cap h O(g_j)) with g_j ranging over S_{|g|}.
Rational shadow_overlap_sum(const BoundaryModel& model, const Word& g, const Word& h);

// --- exact arithmetic in Q[sqrt(s)] ------------------------------------------

/// p + q sqrt(s).
struct QuadRational {
  Rational p = 0;
  Rational q = 0;

  QuadRational& operator+=(const QuadRational& o) {
    p += o.p;
    q += o.q;
    return *this;
  }
  bool is_zero() const { return p == 0 && q == 0; }
  double to_double(int s) const;
};

/// w * s^{e/2} for integer e.
QuadRational scaled_half_power(const Rational& w, int s, int e);

/// Compares two nonnegative values p1 + q1 sqrt s and p2 + q2 sqrt s exactly.
int compare(const QuadRational& a, const QuadRational& b, int s);

// --- measures on words and the Pi matrix -------------------------------------

struct WordMeasure {
  std::vector<Word> atoms;
  std::vector<Rational> weights;

  static WordMeasure uniform_sphere(const BoundaryModel& model, int n);
  /// (delta_h + delta_{h^{-1}}) / 2.
  static WordMeasure symmetric_pair(const Word& h);
  int max_length() const;
};

class PiMatrix {
 public:
  PiMatrix(BoundaryModel model, int r, std::vector<Word> rows,
           std::map<std::pair<int, int>, QuadRational> entries);

  const BoundaryModel& model() const noexcept { return model_; }
  int r() const noexcept { return r_; }
  std::size_t size() const noexcept { return rows_.size(); }
  const std::vector<Word>& rows() const noexcept { return rows_; }
  /// Nonzero entries keyed by (i, j).
  const std::map<std::pair<int, int>, QuadRational>& entries() const noexcept {
    return entries_;
  }
  QuadRational at(int i, int j) const;
  Eigen::MatrixXd to_dense() const;
  std::vector<QuadRational> column_sums() const;
  bool is_symmetric() const;

 private:
  BoundaryModel model_;
  int r_;
  std::vector<Word> rows_;
  std::map<std::pair<int, int>, QuadRational> entries_;
};

struct PiConfig {
  std::size_t max_rows = 5000;
};

/// <pi(mu) chi_i, chi_j> over the cylinders chi_i of S_r. Each h maps
/// O(g_i) onto the cylinder of the reduced word h g_i, on which the
/// Radon-Nikodym derivative is the constant (2m-1)^{|h| - 2c} with c the
/// cancellation length, so the entries are exact in Q[sqrt(2m-1)].
PiMatrix build_pi_matrix(const BoundaryModel& model, int r, const WordMeasure& mu,
                         const PiConfig& cfg = {});

/// Row sum of the Pi matrix for row g, rho(O(g)) sum_h mu(h) s^{-(|h|-2c)/2},
/// computed without materializing the matrix.
QuadRational pi_row_sum(const BoundaryModel& model, const Word& g, const WordMeasure& mu);

struct MatrixNormCase {
  int r = 0;
  int n = 0;
  std::size_t rows = 0;
  /// Largest column l1 sum (Gershgorin bound on the spectral norm).
  QuadRational gershgorin_exact;
  double gershgorin = 0.0;
  /// G * (2m-1)^{r + n/2} / n^2.
  double ratio = 0.0;
  /// Dense spectral norm, when the matrix was materialized.
  std::optional<double> spectral_norm;
};

struct MatrixNormReport {
  std::vector<MatrixNormCase> cases;
  /// max ratio: the smallest C with G <= C n^2 (2m-1)^{-r-n/2} on every case.
  double fitted_constant = 0.0;
  bool spectral_below_gershgorin = true;
};

/// Gershgorin check for uniform sphere measures mu_n. Matrices with at most
/// dense_limit rows are materialized and eigensolved.
MatrixNormReport verify_matrixnorm(const BoundaryModel& model,
                                   const std::vector<std::pair<int, int>>& r_n_pairs,
                                   std::size_t dense_limit = 500);

// --- radial chain -----------------------------------------------------------

/// Return probabilities of the walk driven by the uniform measure on S_n,
/// from the exact law of the word length (a Markov chain by symmetry).
ReturnProbabilities radial_return_probabilities(const BoundaryModel& model, int n, int K);

/// Exact E|X_t| / t for the same walk.
double radial_drift(const BoundaryModel& model, int n, int steps);

/// Exact law of |X_t|: counts[L] out of (#S_n)^t paths.
std::vector<BigInt> radial_length_counts(const BoundaryModel& model, int n, int steps);

}  // namespace shrink::tree
