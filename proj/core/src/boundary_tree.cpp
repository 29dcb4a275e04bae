#include "shrink/boundary_tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace shrink::tree {

namespace {

BigInt ipow(long long base, int e) {
  return boost::multiprecision::pow(BigInt(base), static_cast<unsigned>(e));
}

// Letters in enumeration order: 1, -1, 2, -2, ...
std::vector<int> letters(int rank) {
  std::vector<int> out;
  for (int k = 1; k <= rank; ++k) {
    out.push_back(k);
    out.push_back(-k);
  }
  return out;
}

Word concat(const Word& a, const Word& b) {
  Word w = a;
  w.insert(w.end(), b.begin(), b.end());
  return w;
}

// Visits every reduced word of length n extending `prefix` (assumed reduced).
void for_each_extension(int rank, Word& prefix, int n,
                        const std::function<void(const Word&)>& fn) {
  if (static_cast<int>(prefix.size()) == n) {
    fn(prefix);
    return;
  }
  for (int x : letters(rank)) {
    if (!prefix.empty() && prefix.back() == -x) continue;
    prefix.push_back(x);
    for_each_extension(rank, prefix, n, fn);
    prefix.pop_back();
  }
}

QuadRational scale(const QuadRational& v, const Rational& f) {
  return {v.p * f, v.q * f};
}

void check_word(const BoundaryModel& model, const Word& w) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0 || std::abs(w[i]) > model.rank) {
      throw std::invalid_argument("letter outside the generating set: " + word_to_string(w));
    }
    if (i > 0 && w[i] == -w[i - 1]) {
      throw std::invalid_argument("word is not reduced: " + word_to_string(w));
    }
  }
}

}  // namespace

BoundaryModel::BoundaryModel(int rank_, int busemann_slack_)
    : rank(rank_), busemann_slack(busemann_slack_) {
  if (rank < 2) throw std::invalid_argument("tree model needs rank m >= 2");
  if (busemann_slack < 0) throw std::invalid_argument("Busemann slack must be >= 0");
}

double BoundaryModel::delta() const { return std::log(static_cast<double>(branching())); }

BigInt BoundaryModel::sphere_size(int n) const {
  if (n < 0) throw std::invalid_argument("negative sphere radius");
  if (n == 0) return 1;
  return BigInt(2 * rank) * ipow(branching(), n - 1);
}

int gromov_product(const Word& u, const Word& v) {
  const std::size_t n = std::min(u.size(), v.size());
  std::size_t i = 0;
  while (i < n && u[i] == v[i]) ++i;
  return static_cast<int>(i);
}

int busemann(const Word& g, const Word& h) {
  return static_cast<int>(h.size()) - 2 * gromov_product(g, h);
}

CylinderShadow::CylinderShadow(Word prefix) : prefix_(std::move(prefix)) {
  if (prefix_.empty()) throw std::invalid_argument("cylinder prefix must be nonempty");
  if (freely_reduce(prefix_) != prefix_) {
    throw std::invalid_argument("cylinder prefix is not reduced: " + word_to_string(prefix_));
  }
}

Rational ps_measure(const BoundaryModel& model, const CylinderShadow& c) {
  check_word(model, c.prefix());
  return Rational(BigInt(1), model.sphere_size(c.length()));
}

std::vector<Word> sphere(const BoundaryModel& model, int n) {
  if (n < 0) throw std::invalid_argument("negative sphere radius");
  std::vector<Word> out;
  Word prefix;
  for_each_extension(model.rank, prefix, n, [&](const Word& w) { out.push_back(w); });
  std::sort(out.begin(), out.end());
  return out;
}

SphereCensus sphere_census(const BoundaryModel& model, int n_max) {
  if (n_max < 0) throw std::invalid_argument("negative sphere radius");
  SphereCensus census;
  census.counts.assign(static_cast<std::size_t>(n_max) + 1, 0);
  // Iterative depth-first walk; stack[d] is the letter slot tried at depth d.
  const auto alphabet = letters(model.rank);
  const int width = static_cast<int>(alphabet.size());
  std::vector<int> word;
  std::vector<int> next_slot{0};
  census.counts[0] = 1;
  while (!next_slot.empty()) {
    const int depth = static_cast<int>(word.size());
    int& slot = next_slot.back();
    if (depth == n_max || slot == width) {
      next_slot.pop_back();
      if (!word.empty()) word.pop_back();
      continue;
    }
    const int x = alphabet[slot++];
    if (!word.empty() && word.back() == -x) continue;
    word.push_back(x);
    ++census.counts[word.size()];
    next_slot.push_back(0);
  }
  census.cylinder_sums.assign(census.counts.size(), Rational(0));
  for (int L = 1; L <= n_max; ++L) {
    // Every cylinder of length L has the same measure 1 / #S_L.
    census.cylinder_sums[L] = Rational(BigInt(census.counts[L]), model.sphere_size(L));
  }
  return census;
}

std::vector<Word> x_a_set(const BoundaryModel& model, const Word& g, int n, int a) {
  check_word(model, g);
  if (static_cast<int>(g.size()) <= n) {
    throw std::invalid_argument("x_a_set needs |g| > n");
  }
  if (a < 0 || a > n) throw std::invalid_argument("x_a_set needs 0 <= a <= n");
  const int hi = n - 2 * a;
  const int lo = hi - model.busemann_slack;
  std::vector<Word> out;
  for (auto& h : sphere(model, n)) {
    const int v = -busemann(g, h);
    if ((model.busemann_slack == 0 ? v == hi : (lo < v && v <= hi))) out.push_back(h);
  }
  return out;
}

Rational shadow_overlap_sum(const BoundaryModel& model, const Word& g, const Word& h) {
  check_word(model, g);
  check_word(model, h);
  const int r = static_cast<int>(g.size());
  Rational total = 0;
  for (const auto& gj : sphere(model, r)) {
    const Word w = freely_reduce(concat(h, gj));
    if (w.empty()) return Rational(1);  // h O(g_j) is the whole boundary.
    // Two cylinders intersect iff one prefix extends the other.
    const std::size_t common = gromov_product(g, w);
    if (common == std::min(g.size(), w.size())) {
      const Word& longer = g.size() >= w.size() ? g : w;
      total += ps_measure(model, CylinderShadow(longer));
    }
  }
  return total;
}

// --- Q[sqrt s] -------------------------------------------------------------------

double QuadRational::to_double(int s) const {
  return p.convert_to<double>() + q.convert_to<double>() * std::sqrt(static_cast<double>(s));
}

QuadRational scaled_half_power(const Rational& w, int s, int e) {
  const int k = e >= 0 ? e / 2 : -((-e + 1) / 2);  // floor(e / 2)
  Rational f = w;
  if (k >= 0) {
    f *= ipow(s, k);
  } else {
    f /= ipow(s, -k);
  }
  if (e - 2 * k == 0) return {f, 0};
  return {0, f};
}

int compare(const QuadRational& a, const QuadRational& b, int s) {
  const Rational dp = a.p - b.p;
  const Rational dq = a.q - b.q;
  auto sign = [](const Rational& x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); };
  const int sp = sign(dp), sq = sign(dq);
  if (sp >= 0 && sq >= 0) return (sp || sq) ? 1 : 0;
  if (sp <= 0 && sq <= 0) return -1;
  // Opposite signs: compare dp^2 with s dq^2.
  const Rational lhs = dp * dp;
  const Rational rhs = dq * dq * s;
  if (lhs == rhs) return 0;
  return (lhs > rhs) == (sp > 0) ? 1 : -1;
}

// --- measures and the Pi matrix -------------------------------------------------

WordMeasure WordMeasure::uniform_sphere(const BoundaryModel& model, int n) {
  if (n < 1) throw std::invalid_argument("there is no shell S_0");
  WordMeasure mu;
  mu.atoms = sphere(model, n);
  const Rational w(BigInt(1), BigInt(mu.atoms.size()));
  mu.weights.assign(mu.atoms.size(), w);
  return mu;
}

WordMeasure WordMeasure::symmetric_pair(const Word& h) {
  if (h.empty()) throw std::invalid_argument("symmetric_pair needs h != e");
  const Word hr = freely_reduce(h);
  return {{hr, invert_word(hr)}, {Rational(1, 2), Rational(1, 2)}};
}

int WordMeasure::max_length() const {
  int m = 0;
  for (const auto& a : atoms) m = std::max(m, static_cast<int>(a.size()));
  return m;
}

PiMatrix::PiMatrix(BoundaryModel model, int r, std::vector<Word> rows,
                   std::map<std::pair<int, int>, QuadRational> entries)
    : model_(model), r_(r), rows_(std::move(rows)), entries_(std::move(entries)) {}

QuadRational PiMatrix::at(int i, int j) const {
  auto it = entries_.find({i, j});
  return it == entries_.end() ? QuadRational{} : it->second;
}

Eigen::MatrixXd PiMatrix::to_dense() const {
  const auto n = static_cast<Eigen::Index>(rows_.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [ij, v] : entries_) m(ij.first, ij.second) = v.to_double(model_.branching());
  return m;
}

std::vector<QuadRational> PiMatrix::column_sums() const {
  std::vector<QuadRational> sums(rows_.size());
  for (const auto& [ij, v] : entries_) sums[ij.second] += v;
  return sums;
}

bool PiMatrix::is_symmetric() const {
  for (const auto& [ij, v] : entries_) {
    const QuadRational t = at(ij.second, ij.first);
    if (t.p != v.p || t.q != v.q) return false;
  }
  return true;
}

PiMatrix build_pi_matrix(const BoundaryModel& model, int r, const WordMeasure& mu,
                         const PiConfig& cfg) {
  if (mu.atoms.empty()) throw std::invalid_argument("build_pi_matrix: empty measure");
  for (const auto& h : mu.atoms) {
    check_word(model, h);
    if (h.empty()) throw std::invalid_argument("build_pi_matrix: identity atom (no shell S_0)");
  }
  if (r <= mu.max_length()) {
    throw std::invalid_argument("build_pi_matrix needs r > max |h|");
  }
  if (model.sphere_size(r) > cfg.max_rows) {
    throw BudgetExceeded("Pi matrix with " + model.sphere_size(r).str() +
                             " rows exceeds the row budget",
                         -1, {});
  }
  const int s = model.branching();
  auto rows = sphere(model, r);
  std::map<Word, int> index;
  for (std::size_t i = 0; i < rows.size(); ++i) index.emplace(rows[i], static_cast<int>(i));

  std::map<std::pair<int, int>, QuadRational> entries;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Word& g = rows[i];
    for (std::size_t a = 0; a < mu.atoms.size(); ++a) {
      const Word& h = mu.atoms[a];
      // h O(g) = O(hg); the cancellation c fixes the Radon-Nikodym factor.
      const int c = gromov_product(invert_word(h), g);
      const Word w = freely_reduce(concat(h, g));
      const int e = static_cast<int>(h.size()) - 2 * c;
      const QuadRational factor = scaled_half_power(mu.weights[a], s, e);
      if (static_cast<int>(w.size()) >= r) {
        const Word head(w.begin(), w.begin() + r);
        const int j = index.at(head);
        entries[{static_cast<int>(i), j}] += scale(factor, ps_measure(model, CylinderShadow(w)));
      } else {
        Word prefix = w;
        for_each_extension(model.rank, prefix, r, [&](const Word& gj) {
          entries[{static_cast<int>(i), index.at(gj)}] +=
              scale(factor, ps_measure(model, CylinderShadow(gj)));
        });
      }
    }
  }
  return PiMatrix(model, r, std::move(rows), std::move(entries));
}

QuadRational pi_row_sum(const BoundaryModel& model, const Word& g, const WordMeasure& mu) {
  const int s = model.branching();
  const Rational rho = ps_measure(model, CylinderShadow(g));
  QuadRational total;
  for (std::size_t a = 0; a < mu.atoms.size(); ++a) {
    const Word& h = mu.atoms[a];
    const int c = gromov_product(invert_word(h), g);
    const int e = static_cast<int>(h.size()) - 2 * c;
    total += scaled_half_power(mu.weights[a] * rho, s, -e);
  }
  return total;
}

MatrixNormReport verify_matrixnorm(const BoundaryModel& model,
                                   const std::vector<std::pair<int, int>>& r_n_pairs,
                                   std::size_t dense_limit) {
  const int s = model.branching();
  MatrixNormReport report;
  for (auto [r, n] : r_n_pairs) {
    const auto mu = WordMeasure::uniform_sphere(model, n);
    MatrixNormCase c;
    c.r = r;
    c.n = n;
    c.rows = static_cast<std::size_t>(model.sphere_size(r));
    std::vector<QuadRational> sums;
    if (c.rows <= dense_limit) {
      const PiMatrix pi = build_pi_matrix(model, r, mu, {dense_limit});
      sums = pi.column_sums();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pi.to_dense(),
                                                         Eigen::EigenvaluesOnly);
      c.spectral_norm = eig.eigenvalues().cwiseAbs().maxCoeff();
    } else {
      // mu is symmetric, so Pi is symmetric and column sums equal row sums.
      if (r <= n) throw std::invalid_argument("verify_matrixnorm needs r > n");
      for (const auto& g : sphere(model, r)) sums.push_back(pi_row_sum(model, g, mu));
    }
    c.gershgorin_exact = sums.front();
    for (const auto& v : sums) {
      if (compare(v, c.gershgorin_exact, s) > 0) c.gershgorin_exact = v;
    }
    c.gershgorin = c.gershgorin_exact.to_double(s);
    c.ratio = c.gershgorin * std::pow(static_cast<double>(s), r + 0.5 * n) /
              (static_cast<double>(n) * n);
    if (c.spectral_norm && *c.spectral_norm > c.gershgorin * (1 + 1e-12)) {
      report.spectral_below_gershgorin = false;
    }
    report.fitted_constant = std::max(report.fitted_constant, c.ratio);
    report.cases.push_back(std::move(c));
  }
  return report;
}

// --- radial chain -----------------------------------------------------------

std::vector<BigInt> radial_length_counts(const BoundaryModel& model, int n, int steps) {
  if (n < 1) throw std::invalid_argument("radial chain needs n >= 1");
  if (steps < 0) throw std::invalid_argument("radial chain needs steps >= 0");
  const int s = model.branching();
  const BigInt N = model.sphere_size(n);
  // at_least[j] = #{h in S_n : first j letters of h cancel a given suffix}.
  std::vector<BigInt> at_least(static_cast<std::size_t>(n) + 2, 0);
  at_least[0] = N;
  for (int j = 1; j <= n; ++j) at_least[j] = ipow(s, n - j);

  std::vector<BigInt> counts{1};
  for (int t = 0; t < steps; ++t) {
    std::vector<BigInt> next(counts.size() + static_cast<std::size_t>(n), 0);
    for (std::size_t L = 0; L < counts.size(); ++L) {
      if (counts[L] == 0) continue;
      const int cmax = std::min<int>(static_cast<int>(L), n);
      for (int c = 0; c <= cmax; ++c) {
        const BigInt exactly = at_least[c] - (c < cmax ? at_least[c + 1] : BigInt(0));
        next[L + n - 2 * c] += counts[L] * exactly;
      }
    }
    while (next.size() > 1 && next.back() == 0) next.pop_back();
    counts = std::move(next);
  }
  return counts;
}

ReturnProbabilities radial_return_probabilities(const BoundaryModel& model, int n, int K) {
  if (K < 1) throw std::invalid_argument("radial_return_probabilities: K < 1");
  const BigInt N = model.sphere_size(n);
  ReturnProbabilities out;
  for (int k = 1; k <= K; ++k) {
    const auto counts = radial_length_counts(model, n, 2 * k);
    const BigInt den = boost::multiprecision::pow(N, static_cast<unsigned>(2 * k));
    out.numerators.push_back(counts[0]);
    out.denominators.push_back(den);
    out.r.push_back(std::exp((log_bigint(counts[0]) - log_bigint(den)) / (2.0 * k)));
  }
  return out;
}

double radial_drift(const BoundaryModel& model, int n, int steps) {
  if (steps < 1) throw std::invalid_argument("radial_drift: steps < 1");
  const auto counts = radial_length_counts(model, n, steps);
  BigInt total = 0;
  for (std::size_t L = 0; L < counts.size(); ++L) total += counts[L] * L;
  const BigInt den = boost::multiprecision::pow(model.sphere_size(n), static_cast<unsigned>(steps));
  return std::exp(log_bigint(total) - log_bigint(den)) / steps;
}

}  // namespace shrink::tree
