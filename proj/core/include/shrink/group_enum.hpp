// Balls B_n and shells S_{n,k} of a finitely generated group, growth fits,
// uniform shell measures, Monte Carlo drift/entropy and exact return
// probabilities.
#pragma once

#include "shrink/matrix_core.hpp"

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

namespace shrink {

/// Thrown when an enumeration or convolution outgrows its budget. Carries
/// everything that was finished before the budget ran out.
class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(const std::string& what, int completed_radius,
                 std::vector<std::uint64_t> partial_counts)
      : std::runtime_error(what),
        completed_radius_(completed_radius),
        partial_counts_(std::move(partial_counts)) {}
  /// Largest radius whose ball was fully enumerated, -1 if none.
  int completed_radius() const noexcept { return completed_radius_; }
  const std::vector<std::uint64_t>& partial_counts() const noexcept {
    return partial_counts_;
  }

 private:
  int completed_radius_;
  std::vector<std::uint64_t> partial_counts_;
};

/// Two distinct reduced words evaluated to the same matrix although the
/// presentation claims freeness.
class FreenessViolation : public std::runtime_error {
 public:
  FreenessViolation(Word first, Word second)
      : std::runtime_error("freeness violation: " + word_to_string(first) +
                           " and " + word_to_string(second) +
                           " are the same matrix"),
        first_(std::move(first)),
        second_(std::move(second)) {}
  const Word& first() const noexcept { return first_; }
  const Word& second() const noexcept { return second_; }

 private:
  Word first_;
  Word second_;
};

struct EnumerationConfig {
  std::size_t max_elements = 10'000'000;
  unsigned threads = 1;
  DisplacementConfig displacement{};
};

struct BallElement {
  GroupElement element;
  /// Hyperbolic displacement, or the word length as a degenerate interval.
  Interval displacement;
  /// Smallest integer radius m with the element in B_m.
  int radius = 0;
};

/// An enumerated ball, sorted canonically by (radius, F, entries).
class BallIndex {
 public:
  BallIndex(GroupPresentation presentation, int radius,
            std::vector<BallElement> elements);

  const GroupPresentation& presentation() const noexcept { return presentation_; }
  int radius() const noexcept { return radius_; }
  const std::vector<BallElement>& elements() const noexcept { return elements_; }
  std::size_t size() const noexcept { return elements_.size(); }
  /// counts()[m] = #B_m for 0 <= m <= radius.
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  /// Position of g in elements(), if present.
  std::optional<std::size_t> find(const GroupElement& g) const;

 private:
  GroupPresentation presentation_;
  int radius_;
  std::vector<BallElement> elements_;
  std::vector<std::uint64_t> counts_;
  // matrix hash -> position; collisions resolved by comparing matrices.
  std::unordered_multimap<std::size_t, std::size_t> slots_;
};

/// Enumerates B_n. Hyperbolic metric: the closure of the identity under
/// generator steps inside B_m, grown radius by radius. Word metric with a
/// free presentation: reduced words with a matrix collision audit. Word
/// metric otherwise: breadth-first search in the Cayley graph.
BallIndex enumerate_ball(const GroupPresentation& p, int n,
                         const EnumerationConfig& cfg = {});

// --- measures ---------------------------------------------------------------

/// Finitely supported probability measure on group elements.
class AtomicMeasure {
 public:
  AtomicMeasure(std::vector<GroupElement> support, std::vector<Rational> weights);
  static AtomicMeasure uniform(std::vector<GroupElement> support);
  static AtomicMeasure point_mass(GroupElement g);

  const std::vector<GroupElement>& support() const noexcept { return support_; }
  const std::vector<Rational>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return support_.size(); }
  std::size_t dim() const noexcept { return support_.front().dim(); }
  bool is_uniform() const;
  /// mu(g) == mu(g^{-1}) for every atom.
  bool is_symmetric() const;

 private:
  std::vector<GroupElement> support_;
  std::vector<Rational> weights_;
};

/// Uniform measure on S_{n,k} = B_n \ B_{n-k}.
class ShellMeasure {
 public:
  /// Rejects empty, non-symmetric or identity-containing atom sets.
  ShellMeasure(int n, int width, std::vector<GroupElement> atoms,
               MetricMode metric, bool free);

  int n() const noexcept { return n_; }
  int width() const noexcept { return width_; }
  MetricMode metric() const noexcept { return metric_; }
  bool free() const noexcept { return free_; }
  const std::vector<GroupElement>& atoms() const noexcept { return measure_.support(); }
  std::size_t size() const noexcept { return measure_.size(); }
  const AtomicMeasure& measure() const noexcept { return measure_; }

 private:
  int n_;
  int width_;
  MetricMode metric_;
  bool free_;
  AtomicMeasure measure_;
};

struct ShellReport {
  std::vector<ShellMeasure> shells;
  /// Outer radii whose shell turned out empty.
  std::vector<int> empty_radii;
};

/// Partition of B_n \ B_0 into S_{n,k}, S_{n-k,k}, ..., outermost first.
ShellReport shells(const BallIndex& b, int k);
/// S_{n,k} alone; nullopt if empty.
std::optional<ShellMeasure> shell_at(const BallIndex& b, int n, int k);
/// Default width: 1 for the word metric, 2 for hyperbolic displacement.
int default_shell_width(MetricMode metric);

// --- growth -----------------------------------------------------------------

struct GrowthFit {
  double delta = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  /// (m, log y_m) pairs entering the fit.
  std::vector<std::pair<int, double>> points;
  /// True when the fit used shell increments #B_m - #B_{m-1}.
  bool used_increments = false;
  int window_lo = 0;
  int window_hi = 0;
};

/// Least-squares growth rate over the upper half of the radii. Fits the
/// increments #B_m - #B_{m-1} when all are positive there (their log is
/// exactly linear for free groups), otherwise log #B_m. The confidence
/// range spans the consecutive slopes.
GrowthFit fit_critical_exponent(const std::vector<std::uint64_t>& counts);

// --- random walk statistics --------------------------------------------------

struct DriftEntropy {
  double drift = 0.0;
  double drift_se = 0.0;
  double entropy = 0.0;
  double entropy_se = 0.0;
  /// Miller-Madow bias term (K - 1) / (2 N steps), to be added to entropy.
  double entropy_correction = 0.0;
  std::uint64_t seed = 0;
};

/// Monte Carlo drift and plug-in entropy per step at time `steps`.
DriftEntropy drift_entropy_estimate(const ShellMeasure& mu, int steps,
                                    int samples, std::uint64_t seed,
                                    int bootstrap_replicates = 200);

struct ReturnProbabilities {
  /// r_k = mu^{*2k}(e)^{1/(2k)} for k = 1..r.size().
  std::vector<double> r;
  /// Exact p_{2k} as numerator / denominator.
  std::vector<BigInt> numerators;
  std::vector<BigInt> denominators;
  bool truncated = false;
};

/// Exact return probabilities of a symmetric measure via matrix-keyed
/// convolution of integer path weights.
ReturnProbabilities return_prob_norm_estimate(const AtomicMeasure& mu, int K,
                                              std::size_t max_atoms = 100'000'000);

/// Exact test p_{2k}^{k+1} <= p_{2k+2}^k for consecutive k.
bool is_power_mean_monotone(const ReturnProbabilities& rp);

/// Natural log of a positive big integer, accurate to double precision.
double log_bigint(const BigInt& x);

}  // namespace shrink
