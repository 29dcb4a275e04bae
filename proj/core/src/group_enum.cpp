#include "shrink/group_enum.hpp"

#include "parallel.hpp"
#include "shrink/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

namespace shrink {

namespace {

constexpr std::size_t kChunk = 4096;

bool canonical_less(const BallElement& a, const BallElement& b) {
  if (a.radius != b.radius) return a.radius < b.radius;
  const BigInt fa = a.element.frobenius_sq();
  const BigInt fb = b.element.frobenius_sq();
  if (fa != fb) return fa < fb;
  const auto ea = a.element.entries();
  const auto eb = b.element.entries();
  return std::lexicographical_compare(ea.begin(), ea.end(), eb.begin(), eb.end());
}

// Growing set of distinct matrices with insertion order preserved.
class ElementSet {
 public:
  std::optional<std::size_t> find(const GroupElement& g) const {
    auto [lo, hi] = slots_.equal_range(g.hash());
    for (auto it = lo; it != hi; ++it) {
      if (items_[it->second] == g) return it->second;
    }
    return std::nullopt;
  }
  bool insert(GroupElement g) {
    if (find(g)) return false;
    slots_.emplace(g.hash(), items_.size());
    items_.push_back(std::move(g));
    return true;
  }
  std::size_t size() const noexcept { return items_.size(); }
  const GroupElement& operator[](std::size_t i) const { return items_[i]; }
  std::vector<GroupElement>& items() noexcept { return items_; }

 private:
  std::vector<GroupElement> items_;
  std::unordered_multimap<std::size_t, std::size_t> slots_;
};

std::vector<std::uint64_t> counts_by_radius(const std::vector<int>& radii, int n) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(n) + 1, 0);
  for (int r : radii) {
    if (r <= n) ++counts[static_cast<std::size_t>(r)];
  }
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  return counts;
}

// Expands `frontier` by right multiplication with every generator, keeping
// products accepted by `keep`. Products are computed in parallel chunks and
// merged in chunk order.
template <class Keep>
std::vector<std::size_t> expand(ElementSet& set, const std::vector<std::size_t>& frontier,
                                const std::vector<GroupElement>& gens, WordPolicy policy,
                                unsigned threads, Keep&& keep) {
  const auto chunks = detail::make_chunks(frontier.size(), kChunk);
  std::vector<std::vector<GroupElement>> found(chunks.size());
  detail::for_each_chunk(chunks, threads, [&](const detail::Chunk& c) {
    for (std::size_t i = c.begin; i < c.end; ++i) {
      const GroupElement& g = set[frontier[i]];
      for (const auto& s : gens) {
        GroupElement h = compose(g, s, policy);
        if (keep(h) && !set.find(h)) found[c.index].push_back(std::move(h));
      }
    }
  });
  std::vector<std::size_t> next;
  for (auto& batch : found) {
    for (auto& h : batch) {
      if (set.insert(std::move(h))) next.push_back(set.size() - 1);
    }
  }
  return next;
}

BallIndex enumerate_hyperbolic(const GroupPresentation& p, int n,
                               const EnumerationConfig& cfg) {
  const auto gens = p.symmetric_generators();
  ElementSet set;
  set.insert(GroupElement::identity(2));
  std::vector<int> radii{0};
  for (int m = 1; m <= n; ++m) {
    const BigInt& threshold = ball_threshold_floor(m);
    // Elements found at smaller radii may have new neighbours inside B_m.
    std::vector<std::size_t> frontier(set.size());
    std::iota(frontier.begin(), frontier.end(), std::size_t{0});
    while (!frontier.empty()) {
      frontier = expand(set, frontier, gens, p.word_policy(), cfg.threads,
                        [&](const GroupElement& h) { return h.frobenius_sq() <= threshold; });
      if (set.size() > cfg.max_elements) {
        throw BudgetExceeded("ball enumeration exceeded " +
                                 std::to_string(cfg.max_elements) +
                                 " elements at radius " + std::to_string(m),
                             m - 1, counts_by_radius(radii, m - 1));
      }
    }
    radii.resize(set.size(), m);
  }
  std::vector<BallElement> out;
  out.reserve(set.size());
  for (auto& g : set.items()) {
    const BigInt f = g.frobenius_sq();
    const int r = minimal_radius(f);
    out.push_back({std::move(g), displacement_from_frobenius(f, cfg.displacement), r});
  }
  return BallIndex(p, n, std::move(out));
}

BallIndex enumerate_words(const GroupPresentation& p, int n, const EnumerationConfig& cfg) {
  const auto gens = p.symmetric_generators();
  ElementSet set;
  set.insert(GroupElement::identity(p.dim()));
  std::vector<int> radii{0};
  std::vector<std::size_t> frontier{0};
  for (int m = 1; m <= n; ++m) {
    if (p.freeness_assumed()) {
      // Reduced words: extend by every letter except the inverse of the last.
      std::vector<GroupElement> layer;
      for (std::size_t idx : frontier) {
        const GroupElement& g = set[idx];
        const int last = g.word()->empty() ? 0 : g.word()->back();
        for (const auto& s : gens) {
          if (last != 0 && s.word()->front() == -last) continue;
          layer.push_back(compose(g, s, WordPolicy::Concatenate));
        }
      }
      frontier.clear();
      for (auto& h : layer) {
        if (auto hit = set.find(h)) {
          throw FreenessViolation(*set[*hit].word(), *h.word());
        }
        set.insert(std::move(h));
        frontier.push_back(set.size() - 1);
      }
    } else {
      frontier = expand(set, frontier, gens, p.word_policy(), cfg.threads,
                        [](const GroupElement&) { return true; });
    }
    radii.resize(set.size(), m);
    if (set.size() > cfg.max_elements) {
      throw BudgetExceeded("ball enumeration exceeded " +
                               std::to_string(cfg.max_elements) +
                               " elements at radius " + std::to_string(m),
                           m - 1, counts_by_radius(radii, m - 1));
    }
  }
  std::vector<BallElement> out;
  out.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double r = radii[i];
    out.push_back({std::move(set.items()[i]), Interval{r, r}, radii[i]});
  }
  return BallIndex(p, n, std::move(out));
}

}  // namespace

// --- BallIndex -----------------------------------------------------------------

BallIndex::BallIndex(GroupPresentation presentation, int radius,
                     std::vector<BallElement> elements)
    : presentation_(std::move(presentation)),
      radius_(radius),
      elements_(std::move(elements)) {
  std::sort(elements_.begin(), elements_.end(), canonical_less);
  std::vector<int> radii;
  radii.reserve(elements_.size());
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    slots_.emplace(elements_[i].element.hash(), i);
    radii.push_back(elements_[i].radius);
  }
  counts_ = counts_by_radius(radii, radius_);
}

std::optional<std::size_t> BallIndex::find(const GroupElement& g) const {
  auto [lo, hi] = slots_.equal_range(g.hash());
  for (auto it = lo; it != hi; ++it) {
    if (elements_[it->second].element == g) return it->second;
  }
  return std::nullopt;
}

BallIndex enumerate_ball(const GroupPresentation& p, int n, const EnumerationConfig& cfg) {
  if (n < 0) throw std::invalid_argument("enumerate_ball: negative radius");
  if (p.metric() == MetricMode::HyperbolicDisplacement) {
    return enumerate_hyperbolic(p, n, cfg);
  }
  return enumerate_words(p, n, cfg);
}

// --- measures ---------------------------------------------------------------

AtomicMeasure::AtomicMeasure(std::vector<GroupElement> support,
                             std::vector<Rational> weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  if (support_.empty()) throw std::invalid_argument("measure has empty support");
  if (support_.size() != weights_.size()) {
    throw std::invalid_argument("measure: support and weights differ in length");
  }
  Rational total = 0;
  std::unordered_map<GroupElement, int, GroupElementHash> seen;
  for (std::size_t i = 0; i < support_.size(); ++i) {
    if (support_[i].dim() != support_.front().dim()) {
      throw DimensionMismatch("measure atoms differ in dimension");
    }
    if (weights_[i] <= 0) throw std::invalid_argument("measure weights must be positive");
    if (!seen.emplace(support_[i], 0).second) {
      throw std::invalid_argument("measure has a repeated atom " + support_[i].to_string());
    }
    total += weights_[i];
  }
  if (total != 1) throw std::invalid_argument("measure weights do not sum to 1");
}

AtomicMeasure AtomicMeasure::uniform(std::vector<GroupElement> support) {
  const Rational w(1, static_cast<long long>(support.size()));
  std::vector<Rational> weights(support.size(), w);
  return AtomicMeasure(std::move(support), std::move(weights));
}

AtomicMeasure AtomicMeasure::point_mass(GroupElement g) {
  return AtomicMeasure({std::move(g)}, {Rational(1)});
}

bool AtomicMeasure::is_uniform() const {
  return std::all_of(weights_.begin(), weights_.end(),
                     [&](const Rational& w) { return w == weights_.front(); });
}

bool AtomicMeasure::is_symmetric() const {
  std::unordered_map<GroupElement, const Rational*, GroupElementHash> by_matrix;
  for (std::size_t i = 0; i < support_.size(); ++i) {
    by_matrix.emplace(support_[i].without_word(), &weights_[i]);
  }
  for (std::size_t i = 0; i < support_.size(); ++i) {
    auto it = by_matrix.find(support_[i].inverse().without_word());
    if (it == by_matrix.end() || *it->second != weights_[i]) return false;
  }
  return true;
}

ShellMeasure::ShellMeasure(int n, int width, std::vector<GroupElement> atoms,
                           MetricMode metric, bool free)
    : n_(n),
      width_(width),
      metric_(metric),
      free_(free),
      measure_(AtomicMeasure::uniform(std::move(atoms))) {
  for (const auto& g : measure_.support()) {
    if (g.is_identity()) throw std::invalid_argument("shell contains the identity");
  }
  if (!measure_.is_symmetric()) {
    throw std::invalid_argument("shell atom set is not closed under inversion");
  }
}

int default_shell_width(MetricMode metric) {
  return metric == MetricMode::WordLength ? 1 : 2;
}

std::optional<ShellMeasure> shell_at(const BallIndex& b, int n, int k) {
  if (k < 1) throw std::invalid_argument("shell width must be >= 1");
  if (n < 1 || n > b.radius()) {
    throw std::out_of_range("shell radius " + std::to_string(n) + " outside [1, " +
                            std::to_string(b.radius()) + "]");
  }
  std::vector<GroupElement> atoms;
  for (const auto& e : b.elements()) {
    if (e.radius > std::max(n - k, 0) && e.radius <= n) atoms.push_back(e.element);
  }
  if (atoms.empty()) return std::nullopt;
  return ShellMeasure(n, k, std::move(atoms), b.presentation().metric(),
                      b.presentation().freeness_assumed());
}

ShellReport shells(const BallIndex& b, int k) {
  if (k < 1) throw std::invalid_argument("shell width must be >= 1");
  ShellReport report;
  for (int n = b.radius(); n >= 1; n -= k) {
    if (auto s = shell_at(b, n, k)) {
      report.shells.push_back(std::move(*s));
    } else {
      report.empty_radii.push_back(n);
    }
  }
  return report;
}

// --- growth -----------------------------------------------------------------

GrowthFit fit_critical_exponent(const std::vector<std::uint64_t>& counts) {
  if (counts.size() < 4) {
    throw std::invalid_argument("fit_critical_exponent needs at least 4 radii");
  }
  for (std::size_t m = 1; m < counts.size(); ++m) {
    if (counts[m] < counts[m - 1]) {
      throw std::invalid_argument("ball counts must be nondecreasing");
    }
  }
  if (counts.front() == 0) throw std::invalid_argument("ball counts must be positive");
  const int top = static_cast<int>(counts.size()) - 1;
  GrowthFit fit;
  fit.window_lo = std::max(1, (top + 1) / 2);
  fit.window_hi = top;
  fit.used_increments = true;
  for (int m = fit.window_lo; m <= top; ++m) {
    if (counts[m] == counts[m - 1]) fit.used_increments = false;
  }
  for (int m = fit.window_lo; m <= top; ++m) {
    const double y = fit.used_increments
                         ? std::log(static_cast<double>(counts[m] - counts[m - 1]))
                         : std::log(static_cast<double>(counts[m]));
    fit.points.emplace_back(m, y);
  }
  const double k = static_cast<double>(fit.points.size());
  double mx = 0, my = 0;
  for (auto [m, y] : fit.points) {
    mx += m;
    my += y;
  }
  mx /= k;
  my /= k;
  double sxy = 0, sxx = 0;
  for (auto [m, y] : fit.points) {
    sxy += (m - mx) * (y - my);
    sxx += (m - mx) * (m - mx);
  }
  fit.delta = sxy / sxx;
  fit.lo = fit.hi = fit.delta;
  for (std::size_t i = 1; i < fit.points.size(); ++i) {
    const double s = fit.points[i].second - fit.points[i - 1].second;
    fit.lo = std::min(fit.lo, s);
    fit.hi = std::max(fit.hi, s);
  }
  return fit;
}

// --- random walk statistics --------------------------------------------------

double log_bigint(const BigInt& x) {
  if (x <= 0) throw std::domain_error("log_bigint of a non-positive value");
  const auto bits = boost::multiprecision::msb(x);
  if (bits < 1000) return std::log(x.convert_to<double>());
  const unsigned shift = static_cast<unsigned>(bits) - 64;
  const BigInt top = x >> shift;
  return std::log(top.convert_to<double>()) + shift * std::log(2.0);
}

DriftEntropy drift_entropy_estimate(const ShellMeasure& mu, int steps, int samples,
                                    std::uint64_t seed, int bootstrap_replicates) {
  if (steps < 2) throw std::invalid_argument("drift_entropy_estimate: steps < 2");
  if (samples < 100) throw std::invalid_argument("drift_entropy_estimate: samples < 100");
  const bool word_metric = mu.metric() == MetricMode::WordLength;
  if (word_metric && !mu.free()) {
    throw std::invalid_argument(
        "word-metric drift needs a free presentation to read lengths off words");
  }
  const auto& atoms = mu.atoms();
  const auto policy = mu.free() ? WordPolicy::FreelyReduce : WordPolicy::Concatenate;

  std::vector<double> lengths(samples);
  std::vector<std::size_t> position_id(samples);
  std::unordered_map<GroupElement, std::size_t, GroupElementHash> ids;
  for (int s = 0; s < samples; ++s) {
    CounterRng rng(seed, static_cast<std::uint64_t>(s));
    GroupElement g = GroupElement::identity(mu.measure().dim());
    for (int t = 0; t < steps; ++t) {
      g = compose(g, atoms[rng.below(atoms.size())], policy);
    }
    lengths[s] = word_metric ? static_cast<double>(g.word()->size())
                             : displacement(g).mid();
    position_id[s] = ids.emplace(g.without_word(), ids.size()).first->second;
  }

  auto statistics = [&](const std::vector<std::size_t>& pick, double& drift, double& entropy) {
    double sum = 0;
    std::vector<std::uint64_t> freq(ids.size(), 0);
    for (std::size_t i : pick) {
      sum += lengths[i];
      ++freq[position_id[i]];
    }
    drift = sum / (static_cast<double>(pick.size()) * steps);
    double h = 0;
    const double total = static_cast<double>(pick.size());
    for (auto f : freq) {
      if (f) h -= (f / total) * std::log(f / total);
    }
    entropy = h / steps;
  };

  std::vector<std::size_t> all(samples);
  std::iota(all.begin(), all.end(), std::size_t{0});
  DriftEntropy out;
  out.seed = seed;
  statistics(all, out.drift, out.entropy);
  out.entropy_correction =
      (static_cast<double>(ids.size()) - 1.0) / (2.0 * samples * steps);

  std::vector<double> boot_drift, boot_entropy;
  std::vector<std::size_t> pick(samples);
  for (int rep = 0; rep < bootstrap_replicates; ++rep) {
    CounterRng rng(seed ^ 0xb007b007b007b007ULL, static_cast<std::uint64_t>(rep));
    for (auto& i : pick) i = rng.below(static_cast<std::uint64_t>(samples));
    double d, h;
    statistics(pick, d, h);
    boot_drift.push_back(d);
    boot_entropy.push_back(h);
  }
  auto stddev = [](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / (v.size() - 1));
  };
  out.drift_se = stddev(boot_drift);
  out.entropy_se = stddev(boot_entropy);
  return out;
}

ReturnProbabilities return_prob_norm_estimate(const AtomicMeasure& mu, int K,
                                              std::size_t max_atoms) {
  if (K < 1) throw std::invalid_argument("return_prob_norm_estimate: K < 1");
  if (!mu.is_symmetric()) {
    throw std::invalid_argument(
        "return probabilities bound the norm only for symmetric measures");
  }
  // Integer path weights over the common denominator D of the weights.
  BigInt D = 1;
  for (const auto& w : mu.weights()) {
    const BigInt& q = denominator(w);
    D = D / boost::multiprecision::gcd(D, q) * q;
  }
  std::vector<GroupElement> steps;
  std::vector<BigInt> step_weight;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    steps.push_back(mu.support()[i].without_word());
    step_weight.push_back(numerator(mu.weights()[i]) * (D / denominator(mu.weights()[i])));
  }

  ReturnProbabilities out;
  std::unordered_map<GroupElement, BigInt, GroupElementHash> current;
  current.emplace(GroupElement::identity(mu.dim()), BigInt(1));
  BigInt denom = 1;
  for (int k = 1; k <= K; ++k) {
    if (current.size() * steps.size() > max_atoms) {
      out.truncated = true;
      break;
    }
    std::unordered_map<GroupElement, BigInt, GroupElementHash> next;
    next.reserve(current.size() * steps.size());
    for (const auto& [g, c] : current) {
      for (std::size_t i = 0; i < steps.size(); ++i) {
        next[compose(g, steps[i])] += c * step_weight[i];
      }
    }
    current = std::move(next);
    denom *= D;
    // For symmetric mu, mu^{*2k}(e) = sum_g mu^{*k}(g)^2.
    BigInt num = 0;
    for (const auto& [g, c] : current) num += c * c;
    const BigInt den = denom * denom;
    out.numerators.push_back(num);
    out.denominators.push_back(den);
    out.r.push_back(std::exp((log_bigint(num) - log_bigint(den)) / (2.0 * k)));
  }
  return out;
}

bool is_power_mean_monotone(const ReturnProbabilities& rp) {
  for (std::size_t i = 0; i + 1 < rp.numerators.size(); ++i) {
    // r_k <= r_{k+1}  <=>  p_{2k}^{k+1} <= p_{2k+2}^k, with k = i + 1.
    const unsigned k = static_cast<unsigned>(i + 1);
    const BigInt lhs = boost::multiprecision::pow(rp.numerators[i], k + 1) *
                       boost::multiprecision::pow(rp.denominators[i + 1], k);
    const BigInt rhs = boost::multiprecision::pow(rp.numerators[i + 1], k) *
                       boost::multiprecision::pow(rp.denominators[i], k + 1);
    if (lhs > rhs) return false;
  }
  return true;
}

}  // namespace shrink
