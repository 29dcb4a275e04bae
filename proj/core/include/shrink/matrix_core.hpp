// Exact SL_d(Z) elements, the hyperbolic displacement metric and a few
// structural tests on SL_2(Z) elements.
//
// Norm comparisons never go through floating point: the ball B_n is the set
// of g with F(g) = sum of squared entries <= e^n + e^{-n}, and that threshold
// is resolved once per radius to an exact integer floor.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace shrink {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Signed 1-based generator indices: +k is generator k, -k its inverse.
using Word = std::vector<int>;

/// Cancels adjacent x, -x pairs.
Word freely_reduce(Word w);
Word invert_word(const Word& w);
std::string word_to_string(const Word& w);

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotUnimodular : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class WordPolicy { Concatenate, FreelyReduce };

class GroupElement {
 public:
  /// Row-major entries; throws NotUnimodular unless det == 1.
  GroupElement(std::size_t dim, std::vector<BigInt> entries,
               std::optional<Word> word = std::nullopt);

  static GroupElement identity(std::size_t dim);
  static GroupElement from_rows(
      std::initializer_list<std::initializer_list<long long>> rows,
      std::optional<Word> word = std::nullopt);

  std::size_t dim() const noexcept { return dim_; }
  const BigInt& at(std::size_t row, std::size_t col) const {
    return entries_[row * dim_ + col];
  }
  std::span<const BigInt> entries() const noexcept { return entries_; }
  const std::optional<Word>& word() const noexcept { return word_; }

  GroupElement with_word(std::optional<Word> word) const;
  GroupElement without_word() const { return with_word(std::nullopt); }

  GroupElement inverse() const;
  GroupElement negated() const;
  GroupElement transposed() const;

  /// Squared Frobenius norm, F(g) = sum of squared entries.
  BigInt frobenius_sq() const;
  BigInt trace() const;
  bool is_identity() const;
  bool is_minus_identity() const;

  /// Matrices compare equal regardless of the attached words.
  friend bool operator==(const GroupElement& a, const GroupElement& b) {
    return a.dim_ == b.dim_ && a.entries_ == b.entries_;
  }
  std::size_t hash() const noexcept;

  std::string to_string() const;

 private:
  struct Unchecked {};
  GroupElement(Unchecked, std::size_t dim, std::vector<BigInt> entries,
               std::optional<Word> word);

  friend GroupElement compose(const GroupElement&, const GroupElement&,
                              WordPolicy);

  std::size_t dim_;
  std::vector<BigInt> entries_;
  std::optional<Word> word_;
};

struct GroupElementHash {
  std::size_t operator()(const GroupElement& g) const noexcept {
    return g.hash();
  }
};

/// Matrix product a*b. The word is the concatenation when both factors
/// carry one (freely reduced under WordPolicy::FreelyReduce).
GroupElement compose(const GroupElement& a, const GroupElement& b,
                     WordPolicy policy = WordPolicy::Concatenate);

BigInt determinant(std::size_t dim, std::span<const BigInt> entries);

enum class MetricMode { HyperbolicDisplacement, WordLength };

class GroupPresentation {
 public:
  GroupPresentation(std::vector<GroupElement> generators, MetricMode metric,
                    bool freeness_assumed);

  const std::vector<GroupElement>& generators() const noexcept {
    return generators_;
  }
  MetricMode metric() const noexcept { return metric_; }
  bool freeness_assumed() const noexcept { return freeness_assumed_; }
  std::size_t dim() const noexcept { return generators_.front().dim(); }
  std::size_t rank() const noexcept { return generators_.size(); }
  WordPolicy word_policy() const noexcept {
    return freeness_assumed_ ? WordPolicy::FreelyReduce
                             : WordPolicy::Concatenate;
  }

  /// Generator for a signed index (inverses derived), word attached.
  GroupElement generator(int signed_index) const;
  /// g_1, g_1^{-1}, g_2, g_2^{-1}, ... with one-letter words.
  std::vector<GroupElement> symmetric_generators() const;
  /// Evaluates a word in the generators.
  GroupElement evaluate(const Word& w) const;

 private:
  std::vector<GroupElement> generators_;
  MetricMode metric_;
  bool freeness_assumed_;
};

/// The Sanov subgroup <[[1,2],[0,1]], [[1,0],[2,1]]>, free of rank 2.
GroupPresentation sanov_presentation(MetricMode metric);

nlohmann::json presentation_to_json(const GroupPresentation& p);
GroupPresentation presentation_from_json(const nlohmann::json& j);
GroupPresentation load_presentation(const std::filesystem::path& path);

// --- hyperbolic displacement ---------------------------------------------

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const noexcept { return hi - lo; }
  double mid() const noexcept { return 0.5 * (lo + hi); }
  bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

struct DisplacementConfig {
  double tolerance = 1e-12;
  unsigned initial_precision_bits = 80;
  unsigned max_precision_bits = 1u << 15;
};

/// d(g.i, i) = 2 log sigma_max(g) for g in SL_2(Z), basepoint i in H^2,
/// as an outward-rounded interval narrower than cfg.tolerance (or as narrow
/// as two adjacent doubles when the value is too large for that).
Interval displacement(const GroupElement& g, const DisplacementConfig& cfg = {});
Interval displacement_from_frobenius(const BigInt& frobenius_sq,
                                     const DisplacementConfig& cfg = {});

/// floor(e^n + e^{-n}) for n >= 1, and 2 for n == 0. Cached.
const BigInt& ball_threshold_floor(int n);

/// Exact test F(g) <= e^n + e^{-n}, i.e. d(g.i, i) <= n.
bool ball_membership(const GroupElement& g, int n);

/// Smallest integer n >= 0 with F <= e^n + e^{-n}.
int minimal_radius(const BigInt& frobenius_sq);

/// |trace| == 2 and g != +-I.
bool is_parabolic(const GroupElement& g);

/// g == I mod 2.
bool in_principal_congruence_2(const GroupElement& g);

}  // namespace shrink
