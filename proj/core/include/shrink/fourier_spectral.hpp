// The Fourier-lattice model of the Koopman representation on L^2_0 of the
// torus: g acts on Z^d \ 0 by b -> g^T b. A measure mu on the group gives the
// Markov operator (T f)(b) = sum_g mu(g) f(g^T b); compressing it to the
// window 0 < ||b||_inf <= B yields a finite self-adjoint matrix (for symmetric
// mu) whose norm is a lower bound for the norm of the full operator.
#pragma once

#include "shrink/group_enum.hpp"
#include "shrink/matrix_core.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace shrink {

using LatticeVector = std::vector<BigInt>;

/// g^T b in exact integer arithmetic. Rejects b == 0 and size mismatches.
LatticeVector dual_act(const GroupElement& g, const LatticeVector& b);

struct OperatorConfig {
  /// Largest admissible number of window vectors, (2B+1)^d - 1.
  std::size_t max_vectors = 60'000'000;
  unsigned threads = 1;
};

/// Connected components of the window graph with an edge b -- g^T b for
/// every atom g whose image stays in the window.
struct WindowComponents {
  std::vector<std::uint32_t> label;
  std::size_t count = 0;
  /// Component sizes indexed by label.
  std::vector<std::size_t> sizes;
};

class TruncatedLatticeOperator {
 public:
  /// Throws BudgetExceeded when the window is larger than cfg.max_vectors
  /// and std::invalid_argument for B < 1 or atoms too large for 64-bit
  /// window arithmetic.
  TruncatedLatticeOperator(const AtomicMeasure& mu, int window,
                           const OperatorConfig& cfg = {});

  int window() const noexcept { return window_; }
  std::size_t dim() const noexcept { return dim_; }
  /// Number of window vectors, the matrix size.
  std::size_t size() const noexcept { return size_; }
  std::size_t atom_count() const noexcept { return weights_.size(); }
  double weight(std::size_t atom) const { return weights_.at(atom); }
  /// Position of b in the window, nullopt for 0 or out-of-window vectors.
  std::optional<std::size_t> index_of(std::span<const long long> b) const;
  std::vector<long long> vector_at(std::size_t index) const;

  /// Fraction of window vectors whose image under atom j leaves the window.
  const std::vector<double>& dropped_fraction() const noexcept { return dropped_; }
  /// sum_j mu(g_j) * dropped_fraction()[j].
  double dropped_mass() const;

  /// Exact check that the action table equals its adjoint: every atom has
  /// an inverse atom of the same weight, and the inverse undoes each kept
  /// image. Computed once at construction.
  bool is_self_adjoint() const noexcept { return self_adjoint_; }

  /// y = T x. Rows are split into fixed chunks, so the result does not
  /// depend on the thread count.
  void apply(std::span<const double> x, std::span<double> y) const;

  /// Padded layout: all (2B+1)^d raw positions in row-major order of
  /// b + (B, ..., B), with the slot of the zero vector held at 0. Iterative
  /// solvers work in this layout to avoid index compaction.
  std::size_t padded_size() const noexcept { return size_ + 1; }
  std::size_t zero_slot() const noexcept { return zero_raw_; }
  void apply_padded(std::span<const double> x, std::span<double> y) const;

  /// Even layout: the operator commutes with b -> -b, and on even vectors
  /// only b_0 >= 0 is stored, as (B+1) slabs of side^(d-1) padded entries.
  /// The slab b_0 = 0 is stored whole (mirror entries equal) and carries
  /// weight 1/2 in the inner product, making apply_even self-adjoint.
  std::size_t even_slab_size() const noexcept { return slab_; }
  std::size_t even_size() const noexcept { return (window_ + 1) * even_slab_size(); }
  void apply_even(std::span<const double> x, std::span<double> y) const;

  WindowComponents components() const;

  /// Coordinate-list dump: a "# {json}" header line, then one line
  /// "b_in... b_out... weight" per kept entry, with b_out = g^T b_in.
  void write_coo(std::ostream& out, const std::string& measure_description) const;

  unsigned threads() const noexcept { return threads_; }

 private:
  std::size_t raw_index(std::span<const long long> b) const;

  int window_;
  std::size_t dim_;
  std::size_t side_;
  std::size_t size_;
  std::size_t slab_;
  std::size_t zero_raw_;
  unsigned threads_;
  // Atom matrices, row-major, and their weights.
  std::vector<std::vector<long long>> atoms_;
  std::vector<double> weights_;
  std::vector<std::optional<std::size_t>> inverse_atom_;
  std::vector<double> dropped_;
  bool self_adjoint_ = false;
};

enum class NormMethod { Lanczos, PowerIteration };
std::string to_string(NormMethod m);

struct NormConfig {
  double tolerance = 1e-8;
  int max_iterations = 10'000;
  std::uint64_t seed = 0;
  NormMethod method = NormMethod::Lanczos;
};

struct NormEstimate {
  /// |Rayleigh quotient| of an explicit vector: a lower bound for the norm
  /// of the compression, hence for the norm of the full operator.
  double value = 0.0;
  int iterations = 0;
  /// ||A v - theta v|| for the returned unit vector v (power iteration:
  /// the same quantity for A^2).
  double residual = 0.0;
  NormMethod method = NormMethod::Lanczos;
  bool converged = false;
  std::uint64_t seed = 0;
  /// An eigenvalue of the compression (in absolute value) lies in
  /// [interval_lo, interval_hi].
  double interval_lo = 0.0;
  double interval_hi = 0.0;
};

/// Largest |eigenvalue| of a self-adjoint compression from a seeded random
/// start. Lanczos runs without reorthogonalization; a second pass rebuilds
/// the Ritz vector and the reported value is its exact Rayleigh quotient.
/// Throws std::invalid_argument if the operator is not self-adjoint.
NormEstimate operator_norm_estimate(const TruncatedLatticeOperator& op,
                                    const NormConfig& cfg = {});

/// <x, T x> / <x, x>.
double rayleigh_quotient(const TruncatedLatticeOperator& op, std::span<const double> x);

/// Norm of simple random walk on a free group of rank m: sqrt(2m-1) / m.
double free_group_srw_norm(int rank);

struct KestenReport {
  int window = 0;
  int steps = 0;
  NormEstimate lattice;
  double dropped_mass = 0.0;
  ReturnProbabilities returns;
  /// r_K, the last return-probability estimate.
  double return_estimate = 0.0;
  /// |lattice.value - return_estimate|.
  double gap = 0.0;
};

/// Both sides of the intertwining identity: the truncated-lattice norm at
/// window B and the return-probability estimates r_1..r_K.
KestenReport kesten_crosscheck(const AtomicMeasure& mu, int window, int steps,
                               const NormConfig& norm_cfg = {},
                               const OperatorConfig& op_cfg = {});

struct EnvelopeFit {
  /// Smallest C with value_n >= delta n - log_coefficient log n - C.
  double constant = 0.0;
  /// Radii where value_n > delta n (the provable direction fails).
  std::vector<int> upper_violations;
};

/// Envelope check for (n, -2 log estimate_n) pairs against
/// delta n - c log n - C <= value <= delta n.
EnvelopeFit fit_envelope_constant(const std::vector<std::pair<int, double>>& values,
                                  double delta, double log_coefficient);

}  // namespace shrink
