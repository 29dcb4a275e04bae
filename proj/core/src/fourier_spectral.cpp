#include "shrink/fourier_spectral.hpp"

#include "parallel.hpp"
#include "shrink/random.hpp"

#include <boost/pending/disjoint_sets.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace shrink {

namespace {

constexpr std::size_t kRowChunk = 1 << 15;

double chunked_dot(std::span<const double> x, std::span<const double> y, unsigned threads) {
  const auto chunks = detail::make_chunks(x.size(), kRowChunk);
  std::vector<double> partial(chunks.size(), 0.0);
  detail::for_each_chunk(chunks, threads, [&](const detail::Chunk& c) {
    double s = 0.0;
    for (std::size_t i = c.begin; i < c.end; ++i) s += x[i] * y[i];
    partial[c.index] = s;
  });
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

// --- symmetric tridiagonal helpers ------------------------------------------

// Number of eigenvalues of the tridiagonal matrix (diag a, off-diagonal b)
// strictly below x, by the Sturm sequence of the LDL^T pivots.
std::size_t count_below(const std::vector<double>& a, const std::vector<double>& b, double x) {
  std::size_t count = 0;
  double q = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double off = i == 0 ? 0.0 : b[i - 1] * b[i - 1];
    q = a[i] - x - (i == 0 ? 0.0 : off / q);
    if (q == 0.0) q = -std::numeric_limits<double>::min();
    if (q < 0.0) ++count;
  }
  return count;
}

// Eigenvalue number k (0-based, ascending) by bisection inside the
// Gershgorin interval.
double tridiagonal_eigenvalue(const std::vector<double>& a, const std::vector<double>& b,
                              std::size_t k) {
  double lo = std::numeric_limits<double>::max();
  double hi = std::numeric_limits<double>::lowest();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = (i > 0 ? std::abs(b[i - 1]) : 0.0) + (i + 1 < a.size() ? std::abs(b[i]) : 0.0);
    lo = std::min(lo, a[i] - r);
    hi = std::max(hi, a[i] + r);
  }
  for (int it = 0; it < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() *
                                              std::max(std::abs(lo), std::abs(hi));
       ++it) {
    const double mid = 0.5 * (lo + hi);
    if (count_below(a, b, mid) > k) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Unit eigenvector for an extreme eigenvalue theta by two steps of inverse
// iteration. sign = +1 for the largest eigenvalue (theta' I - T is positive
// definite for theta' slightly above theta), -1 for the smallest.
std::vector<double> tridiagonal_extreme_vector(const std::vector<double>& a,
                                               const std::vector<double>& b, double theta,
                                               int sign) {
  const std::size_t n = a.size();
  const double shift = theta + sign * 1e-13 * std::max(1.0, std::abs(theta));
  // M = sign * (shift I - T), positive definite; solve M s = rhs by LDL^T.
  std::vector<double> d(n), l(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double diag = sign * (shift - a[i]);
    d[i] = i == 0 ? diag : diag - l[i - 1] * l[i - 1] * d[i - 1];
    if (d[i] <= 0.0) d[i] = std::numeric_limits<double>::min();
    if (i + 1 < n) l[i] = -sign * b[i] / d[i];
  }
  std::vector<double> s(n, 1.0);
  for (int round = 0; round < 2; ++round) {
    for (std::size_t i = 1; i < n; ++i) s[i] -= l[i - 1] * s[i - 1];
    for (std::size_t i = 0; i < n; ++i) s[i] /= d[i];
    for (std::size_t i = n - 1; i-- > 0;) s[i] -= l[i] * s[i + 1];
    double nrm = 0.0;
    for (double x : s) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (double& x : s) x /= nrm;
  }
  return s;
}

}  // namespace

// --- dual action ---------------------------------------------------------------

LatticeVector dual_act(const GroupElement& g, const LatticeVector& b) {
  if (b.size() != g.dim()) throw DimensionMismatch("lattice vector size does not match matrix");
  if (std::all_of(b.begin(), b.end(), [](const BigInt& x) { return x == 0; })) {
    throw std::invalid_argument("dual action is defined on nonzero lattice vectors");
  }
  LatticeVector out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i] += g.at(j, i) * b[j];
  }
  return out;
}

// --- TruncatedLatticeOperator ---------------------------------------------------

TruncatedLatticeOperator::TruncatedLatticeOperator(const AtomicMeasure& mu, int window,
                                                   const OperatorConfig& cfg)
    : window_(window), dim_(mu.dim()), threads_(std::max(1u, cfg.threads)) {
  if (window < 1) throw std::invalid_argument("window B must be at least 1");
  side_ = 2 * static_cast<std::size_t>(window) + 1;
  std::size_t total = 1;
  for (std::size_t i = 0; i < dim_; ++i) {
    if (total > cfg.max_vectors / side_ + 1) {
      throw BudgetExceeded("lattice window exceeds the vector budget", -1, {});
    }
    total *= side_;
  }
  size_ = total - 1;
  slab_ = total / side_;
  if (size_ > cfg.max_vectors) {
    throw BudgetExceeded("lattice window has " + std::to_string(size_) +
                             " vectors, budget " + std::to_string(cfg.max_vectors),
                         -1, {});
  }
  std::vector<long long> zero(dim_, 0);
  zero_raw_ = raw_index(zero);

  const BigInt limit = (BigInt(1) << 62) / (BigInt(window) * dim_);
  for (std::size_t a = 0; a < mu.size(); ++a) {
    const auto& g = mu.support()[a];
    std::vector<long long> m(dim_ * dim_);
    for (std::size_t i = 0; i < dim_ * dim_; ++i) {
      const BigInt& e = g.entries()[i];
      if (abs(e) > limit) {
        throw std::invalid_argument("atom " + g.to_string() +
                                    " is too large for 64-bit window arithmetic");
      }
      m[i] = static_cast<long long>(e);
    }
    atoms_.push_back(std::move(m));
    weights_.push_back(static_cast<double>(mu.weights()[a]));
  }
  std::unordered_map<GroupElement, std::size_t, GroupElementHash> position;
  for (std::size_t a = 0; a < mu.size(); ++a) position.emplace(mu.support()[a], a);
  for (std::size_t a = 0; a < mu.size(); ++a) {
    const auto it = position.find(mu.support()[a].inverse());
    std::optional<std::size_t> match;
    if (it != position.end() && mu.weights()[it->second] == mu.weights()[a]) match = it->second;
    inverse_atom_.push_back(match);
  }

  // One pass over the window: kept images per atom, and the exact check that
  // the inverse atom undoes every kept image.
  const std::size_t raw_total = size_ + 1;
  const auto chunks = detail::make_chunks(raw_total, kRowChunk);
  std::vector<std::vector<std::size_t>> kept(chunks.size(), std::vector<std::size_t>(atoms_.size()));
  std::vector<char> undone(chunks.size(), 1);
  const bool has_inverses =
      std::all_of(inverse_atom_.begin(), inverse_atom_.end(), [](const auto& x) { return x.has_value(); });
  detail::for_each_chunk(chunks, threads_, [&](const detail::Chunk& c) {
    std::vector<long long> b(dim_), img(dim_);
    for (std::size_t raw = c.begin; raw < c.end; ++raw) {
      if (raw == zero_raw_) continue;
      std::size_t r = raw;
      for (std::size_t i = dim_; i-- > 0;) {
        b[i] = static_cast<long long>(r % side_) - window_;
        r /= side_;
      }
      for (std::size_t a = 0; a < atoms_.size(); ++a) {
        bool inside = true;
        for (std::size_t i = 0; i < dim_; ++i) {
          long long s = 0;
          for (std::size_t j = 0; j < dim_; ++j) s += atoms_[a][j * dim_ + i] * b[j];
          img[i] = s;
          inside = inside && s >= -window_ && s <= window_;
        }
        if (!inside) continue;
        ++kept[c.index][a];
        if (!has_inverses) continue;
        const auto& g_inv = atoms_[*inverse_atom_[a]];
        for (std::size_t i = 0; i < dim_; ++i) {
          long long s = 0;
          for (std::size_t j = 0; j < dim_; ++j) s += g_inv[j * dim_ + i] * img[j];
          if (s != b[i]) undone[c.index] = 0;
        }
      }
    }
  });
  self_adjoint_ = has_inverses && std::all_of(undone.begin(), undone.end(), [](char u) { return u != 0; });
  dropped_.assign(atoms_.size(), 0.0);
  for (std::size_t a = 0; a < atoms_.size(); ++a) {
    std::size_t k = 0;
    for (const auto& row : kept) k += row[a];
    dropped_[a] = 1.0 - static_cast<double>(k) / static_cast<double>(size_);
  }
}

std::size_t TruncatedLatticeOperator::raw_index(std::span<const long long> b) const {
  std::size_t raw = 0;
  for (std::size_t i = 0; i < dim_; ++i) {
    raw = raw * side_ + static_cast<std::size_t>(b[i] + window_);
  }
  return raw;
}

std::optional<std::size_t> TruncatedLatticeOperator::index_of(std::span<const long long> b) const {
  if (b.size() != dim_) throw DimensionMismatch("lattice vector size does not match window");
  bool nonzero = false;
  for (long long x : b) {
    if (x < -window_ || x > window_) return std::nullopt;
    nonzero = nonzero || x != 0;
  }
  if (!nonzero) return std::nullopt;
  const std::size_t raw = raw_index(b);
  return raw - (raw > zero_raw_ ? 1 : 0);
}

std::vector<long long> TruncatedLatticeOperator::vector_at(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("window index out of range");
  std::size_t raw = index + (index >= zero_raw_ ? 1 : 0);
  std::vector<long long> b(dim_);
  for (std::size_t i = dim_; i-- > 0;) {
    b[i] = static_cast<long long>(raw % side_) - window_;
    raw /= side_;
  }
  return b;
}

double TruncatedLatticeOperator::dropped_mass() const {
  double m = 0.0;
  for (std::size_t a = 0; a < atoms_.size(); ++a) m += weights_[a] * dropped_[a];
  return m;
}

namespace {

long long floor_div(long long a, long long b) {
  const long long q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

long long ceil_div(long long a, long long b) { return -floor_div(-a, b); }

// Range of t in [lo, hi] with lower <= base + slope * t <= upper, in place.
void clip_range(long long base, long long slope, long long lower, long long upper,
                long long& lo, long long& hi) {
  if (slope == 0) {
    if (base < lower || base > upper) hi = lo - 1;
    return;
  }
  long long from, to;
  if (slope > 0) {
    from = ceil_div(lower - base, slope);
    to = floor_div(upper - base, slope);
  } else {
    from = ceil_div(upper - base, slope);
    to = floor_div(lower - base, slope);
  }
  lo = std::max(lo, from);
  hi = std::min(hi, to);
}

}  // namespace

void TruncatedLatticeOperator::apply_padded(std::span<const double> x, std::span<double> y) const {
  if (x.size() != size_ + 1 || y.size() != size_ + 1) {
    throw DimensionMismatch("padded vector size does not match the window");
  }
  const long long B = window_;
  const long long side = static_cast<long long>(side_);
  const std::size_t rows = (size_ + 1) / side_;
  const std::size_t rows_per_chunk = std::max<std::size_t>(1, kRowChunk / side_);
  const auto chunks = detail::make_chunks(rows, rows_per_chunk);
  const std::size_t d = dim_;
  // Along a row only the last coordinate t varies, and the image of
  // (prefix, t) under g^T is base + t * (last row of g): the in-window part
  // of every atom's image is one interval of t with a linear raw index.
  detail::for_each_chunk(chunks, threads_, [&](const detail::Chunk& c) {
    std::vector<long long> prefix(d, 0), base(d);
    for (std::size_t row = c.begin; row < c.end; ++row) {
      std::size_t r = row;
      for (std::size_t i = d - 1; i-- > 0;) {
        prefix[i] = static_cast<long long>(r % side_) - B;
        r /= side_;
      }
      double* out = y.data() + row * side_;
      std::fill(out, out + side_, 0.0);
      for (std::size_t a = 0; a < atoms_.size(); ++a) {
        const long long* g = atoms_[a].data();
        long long lo = -B, hi = B;
        long long raw_base = 0, raw_step = 0;
        for (std::size_t i = 0; i < d; ++i) {
          long long s = 0;
          for (std::size_t j = 0; j + 1 < d; ++j) s += g[j * d + i] * prefix[j];
          base[i] = s;
          const long long slope = g[(d - 1) * d + i];
          clip_range(s, slope, -B, B, lo, hi);
          raw_base = raw_base * side + (s + B);
          raw_step = raw_step * side + slope;
        }
        if (lo > hi) continue;
        const double w = weights_[a];
        const double* src = x.data();
        long long idx = raw_base + raw_step * lo;
        for (long long t = lo; t <= hi; ++t, idx += raw_step) out[t + B] += w * src[idx];
      }
    }
  });
  y[zero_raw_] = 0.0;
}

void TruncatedLatticeOperator::apply_even(std::span<const double> x, std::span<double> y) const {
  const std::size_t slab = even_slab_size();
  if (x.size() != even_size() || y.size() != even_size()) {
    throw DimensionMismatch("even-layout vector size does not match the window");
  }
  const long long B = window_;
  const long long side = static_cast<long long>(side_);
  const long long S = static_cast<long long>(slab);
  const std::size_t d = dim_;
  const std::size_t rows = even_size() / side_;
  const std::size_t rows_per_slab = slab / side_;
  // places[i] = side^(d-1-i), the radix weight of coordinate i.
  std::vector<long long> places(d, 1);
  for (std::size_t i = d - 1; i-- > 0;) places[i] = places[i + 1] * side;
  const std::size_t rows_per_chunk = std::max<std::size_t>(1, kRowChunk / side_);
  const auto chunks = detail::make_chunks(rows, rows_per_chunk);
  // As in apply_padded, but an image c with c_0 < 0 is read at -c: on even
  // vectors f(c) = f(-c). The sign of c_0 changes at most once along a row.
  detail::for_each_chunk(chunks, threads_, [&](const detail::Chunk& c) {
    std::vector<long long> prefix(d, 0);
    for (std::size_t row = c.begin; row < c.end; ++row) {
      prefix[0] = static_cast<long long>(row / rows_per_slab);
      std::size_t r = row % rows_per_slab;
      for (std::size_t i = d - 1; i-- > 1;) {
        prefix[i] = static_cast<long long>(r % side_) - B;
        r /= side_;
      }
      double* out = y.data() + row * side_;
      std::fill(out, out + side_, 0.0);
      for (std::size_t a = 0; a < atoms_.size(); ++a) {
        const long long* g = atoms_[a].data();
        long long lo = -B, hi = B;
        long long base0 = 0, slope0 = 0;
        long long pos_base = 0, pos_step = 0, neg_base = 0, neg_step = 0;
        for (std::size_t i = 0; i < d; ++i) {
          long long s = 0;
          for (std::size_t j = 0; j + 1 < d; ++j) s += g[j * d + i] * prefix[j];
          const long long slope = g[(d - 1) * d + i];
          clip_range(s, slope, -B, B, lo, hi);
          if (i == 0) {
            base0 = s;
            slope0 = slope;
            pos_base = s * S;
            pos_step = slope * S;
            neg_base = -s * S;
            neg_step = -slope * S;
          } else {
            const long long place = places[i];
            pos_base += (s + B) * place;
            pos_step += slope * place;
            neg_base += (-s + B) * place;
            neg_step += -slope * place;
          }
        }
        if (lo > hi) continue;
        // t with c_0 >= 0 versus c_0 < 0.
        long long plo = lo, phi = hi, nlo = lo, nhi = hi;
        clip_range(base0, slope0, 0, B, plo, phi);
        clip_range(base0, slope0, -B, -1, nlo, nhi);
        const double w = weights_[a];
        const double* src = x.data();
        if (plo <= phi) {
          long long idx = pos_base + pos_step * plo;
          for (long long t = plo; t <= phi; ++t, idx += pos_step) out[t + B] += w * src[idx];
        }
        if (nlo <= nhi) {
          long long idx = neg_base + neg_step * nlo;
          for (long long t = nlo; t <= nhi; ++t, idx += neg_step) out[t + B] += w * src[idx];
        }
      }
    }
  });
  y[(slab - 1) / 2] = 0.0;
}

void TruncatedLatticeOperator::apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != size_ || y.size() != size_) {
    throw DimensionMismatch("vector size does not match the window");
  }
  std::vector<double> xp(size_ + 1), yp(size_ + 1);
  std::copy(x.begin(), x.begin() + zero_raw_, xp.begin());
  std::copy(x.begin() + zero_raw_, x.end(), xp.begin() + zero_raw_ + 1);
  apply_padded(xp, yp);
  std::copy(yp.begin(), yp.begin() + zero_raw_, y.begin());
  std::copy(yp.begin() + zero_raw_ + 1, yp.end(), y.begin() + zero_raw_);
}

WindowComponents TruncatedLatticeOperator::components() const {
  std::vector<std::size_t> rank(size_, 0), parent(size_);
  boost::disjoint_sets<std::size_t*, std::size_t*> sets(rank.data(), parent.data());
  for (std::size_t i = 0; i < size_; ++i) sets.make_set(i);
  std::vector<long long> img(dim_);
  for (std::size_t idx = 0; idx < size_; ++idx) {
    const auto b = vector_at(idx);
    for (const auto& g : atoms_) {
      for (std::size_t i = 0; i < dim_; ++i) {
        long long s = 0;
        for (std::size_t j = 0; j < dim_; ++j) s += g[j * dim_ + i] * b[j];
        img[i] = s;
      }
      if (const auto to = index_of(img)) sets.union_set(idx, *to);
    }
  }
  WindowComponents out;
  out.label.assign(size_, 0);
  std::vector<std::uint32_t> root_label(size_, std::numeric_limits<std::uint32_t>::max());
  for (std::size_t i = 0; i < size_; ++i) {
    const std::size_t root = sets.find_set(i);
    if (root_label[root] == std::numeric_limits<std::uint32_t>::max()) {
      root_label[root] = static_cast<std::uint32_t>(out.count++);
      out.sizes.push_back(0);
    }
    out.label[i] = root_label[root];
    ++out.sizes[root_label[root]];
  }
  return out;
}

void TruncatedLatticeOperator::write_coo(std::ostream& out,
                                         const std::string& measure_description) const {
  nlohmann::json header{{"window", window_},
                        {"dim", dim_},
                        {"vectors", size_},
                        {"measure", measure_description},
                        {"atoms", atoms_.size()},
                        {"dropped_fraction", dropped_},
                        {"dropped_mass", dropped_mass()}};
  out << "# " << header.dump() << '\n';
  std::vector<long long> img(dim_);
  out.precision(17);
  for (std::size_t idx = 0; idx < size_; ++idx) {
    const auto b = vector_at(idx);
    for (std::size_t a = 0; a < atoms_.size(); ++a) {
      for (std::size_t i = 0; i < dim_; ++i) {
        long long s = 0;
        for (std::size_t j = 0; j < dim_; ++j) s += atoms_[a][j * dim_ + i] * b[j];
        img[i] = s;
      }
      if (!index_of(img)) continue;
      for (long long v : b) out << v << ' ';
      for (long long v : img) out << v << ' ';
      out << weights_[a] << '\n';
    }
  }
}

// --- norm estimation --------------------------------------------------------------

std::string to_string(NormMethod m) {
  return m == NormMethod::Lanczos ? "lanczos" : "power-iteration";
}

double rayleigh_quotient(const TruncatedLatticeOperator& op, std::span<const double> x) {
  std::vector<double> y(op.size());
  op.apply(x, y);
  const double xx = chunked_dot(x, x, op.threads());
  return xx == 0.0 ? 0.0 : chunked_dot(x, y, op.threads()) / xx;
}

namespace {

// The even subspace as the solvers see it. The operator has nonnegative
// entries, so its norm is its largest eigenvalue, attained by a nonnegative
// eigenvector; symmetrizing that vector under b -> -b keeps it an
// eigenvector, so the norm is already attained on even vectors.
class EvenSpace {
 public:
  explicit EvenSpace(const TruncatedLatticeOperator& op)
      : op_(op), n_(op.even_size()), slab_(op.even_slab_size()),
        chunks_(detail::make_chunks(n_, kRowChunk)) {}

  std::size_t size() const noexcept { return n_; }
  void apply(const std::vector<double>& x, std::vector<double>& y) const { op_.apply_even(x, y); }

  /// Chunk-ordered sum of fn(begin, end, weight) with weight 1/2 on the
  /// b_0 = 0 slab and 1 elsewhere.
  template <class Fn>
  double reduce(Fn&& fn) const {
    std::vector<double> partial(chunks_.size(), 0.0);
    detail::for_each_chunk(chunks_, op_.threads(), [&](const detail::Chunk& c) {
      double s = 0.0;
      const std::size_t split = std::clamp(slab_, c.begin, c.end);
      if (c.begin < split) s += 0.5 * fn(c.begin, split);
      if (split < c.end) s += fn(split, c.end);
      partial[c.index] = s;
    });
    double s = 0.0;
    for (double p : partial) s += p;
    return s;
  }

  double dot(const std::vector<double>& x, const std::vector<double>& y) const {
    return reduce([&](std::size_t b, std::size_t e) {
      double s = 0.0;
      for (std::size_t i = b; i < e; ++i) s += x[i] * y[i];
      return s;
    });
  }

  /// Seeded start vector with entries uniform in [0, 1), mirrored on the
  /// b_0 = 0 slab and normalized.
  std::vector<double> start(std::uint64_t seed) const {
    std::vector<double> v(n_);
    detail::for_each_chunk(chunks_, op_.threads(), [&](const detail::Chunk& c) {
      CounterRng rng(seed, c.index);
      for (std::size_t i = c.begin; i < c.end; ++i) v[i] = rng.uniform();
    });
    for (std::size_t i = 0; i < slab_ / 2; ++i) v[slab_ - 1 - i] = v[i];
    v[(slab_ - 1) / 2] = 0.0;
    const double nv = std::sqrt(dot(v, v));
    for (double& x : v) x /= nv;
    return v;
  }

 private:
  const TruncatedLatticeOperator& op_;
  std::size_t n_;
  std::size_t slab_;
  std::vector<detail::Chunk> chunks_;
};

NormEstimate power_iteration(const TruncatedLatticeOperator& op, const NormConfig& cfg) {
  const EvenSpace sp(op);
  const std::size_t n = sp.size();
  NormEstimate est;
  est.method = NormMethod::PowerIteration;
  est.seed = cfg.seed;
  std::vector<double> x = sp.start(cfg.seed);
  std::vector<double> y(n), z(n);
  sp.apply(x, y);
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    sp.apply(y, z);
    // x is a unit vector: nu = ||A x||^2 = <x, A^2 x>.
    const double ny = std::sqrt(sp.dot(y, y));
    const double nu = ny * ny;
    const double r2 = sp.reduce([&](std::size_t b, std::size_t e) {
      double s = 0.0;
      for (std::size_t i = b; i < e; ++i) {
        const double d = z[i] - nu * x[i];
        s += d * d;
      }
      return s;
    });
    est.iterations = it;
    est.value = ny;
    est.residual = ny == 0.0 ? 0.0 : std::sqrt(r2);
    est.interval_lo = std::sqrt(std::max(0.0, nu - est.residual));
    est.interval_hi = std::sqrt(nu + est.residual);
    if (ny == 0.0 || est.residual < cfg.tolerance) {
      est.converged = true;
      return est;
    }
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = y[i] / ny;
      y[i] = z[i] / ny;
    }
  }
  return est;
}

struct LanczosRun {
  std::vector<double> alpha;
  std::vector<double> beta;
  int steps = 0;
  double residual_estimate = 0.0;
  /// Tridiagonal eigenvector of the top Ritz value.
  std::vector<double> coefficients;
};

// Lanczos without reorthogonalization from the seeded start. With
// `coefficients` set, runs exactly that many steps and accumulates
// sum_j coefficients[j] v_j into `ritz` instead of testing convergence.
LanczosRun lanczos_run(const EvenSpace& sp, std::uint64_t seed, int max_steps, double tolerance,
                       const std::vector<double>* coefficients, std::vector<double>* ritz) {
  const std::size_t n = sp.size();
  std::vector<double> v = sp.start(seed);
  std::vector<double> vprev(n, 0.0), w(n);
  LanczosRun run;
  for (int k = 0; k < max_steps; ++k) {
    sp.apply(v, w);
    const double bprev = k > 0 ? run.beta.back() : 0.0;
    const double ck = coefficients ? (*coefficients)[k] : 0.0;
    const double a = sp.reduce([&](std::size_t b, std::size_t e) {
      double s = 0.0;
      for (std::size_t i = b; i < e; ++i) {
        w[i] -= bprev * vprev[i];
        s += w[i] * v[i];
        if (ritz) (*ritz)[i] += ck * v[i];
      }
      return s;
    });
    const double b2 = sp.reduce([&](std::size_t b, std::size_t e) {
      double s = 0.0;
      for (std::size_t i = b; i < e; ++i) {
        w[i] -= a * v[i];
        s += w[i] * w[i];
      }
      return s;
    });
    const double b = std::sqrt(b2);
    run.alpha.push_back(a);
    run.steps = k + 1;
    if (!coefficients) {
      const double theta = tridiagonal_eigenvalue(run.alpha, run.beta, run.alpha.size() - 1);
      run.coefficients = tridiagonal_extreme_vector(run.alpha, run.beta, theta, 1);
      run.residual_estimate = b * std::abs(run.coefficients.back());
      if (run.residual_estimate < tolerance) break;
    }
    if (k + 1 == max_steps || b <= 1e-300) break;
    run.beta.push_back(b);
    std::swap(vprev, v);
    std::swap(v, w);
    const double inv = 1.0 / b;
    for (double& x : v) x *= inv;
  }
  return run;
}

NormEstimate lanczos(const TruncatedLatticeOperator& op, const NormConfig& cfg) {
  const EvenSpace sp(op);
  NormEstimate est;
  est.method = NormMethod::Lanczos;
  est.seed = cfg.seed;
  const LanczosRun run = lanczos_run(sp, cfg.seed, cfg.max_iterations, cfg.tolerance, nullptr, nullptr);
  est.iterations = run.steps;
  // Second pass: rebuild the Ritz vector and take its Rayleigh quotient.
  std::vector<double> y(sp.size(), 0.0), ay(sp.size());
  lanczos_run(sp, cfg.seed, run.steps, cfg.tolerance, &run.coefficients, &y);
  const double ny = std::sqrt(sp.dot(y, y));
  if (ny == 0.0) {
    est.converged = true;
    return est;
  }
  for (double& v : y) v /= ny;
  sp.apply(y, ay);
  const double rho = sp.dot(y, ay);
  const double r2 = sp.reduce([&](std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      const double d = ay[i] - rho * y[i];
      s += d * d;
    }
    return s;
  });
  est.residual = std::sqrt(r2);
  est.value = std::abs(rho);
  est.converged = est.residual < cfg.tolerance;
  est.interval_lo = std::max(0.0, est.value - est.residual);
  est.interval_hi = est.value + est.residual;
  return est;
}

}  // namespace

NormEstimate operator_norm_estimate(const TruncatedLatticeOperator& op, const NormConfig& cfg) {
  if (!op.is_self_adjoint()) {
    throw std::invalid_argument("norm estimation needs a self-adjoint operator (symmetric measure)");
  }
  if (cfg.max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
  return cfg.method == NormMethod::Lanczos ? lanczos(op, cfg) : power_iteration(op, cfg);
}

double free_group_srw_norm(int rank) {
  if (rank < 1) throw std::invalid_argument("rank must be positive");
  return std::sqrt(2.0 * rank - 1.0) / rank;
}

KestenReport kesten_crosscheck(const AtomicMeasure& mu, int window, int steps,
                               const NormConfig& norm_cfg, const OperatorConfig& op_cfg) {
  KestenReport rep;
  rep.window = window;
  rep.steps = steps;
  TruncatedLatticeOperator op(mu, window, op_cfg);
  rep.lattice = operator_norm_estimate(op, norm_cfg);
  rep.dropped_mass = op.dropped_mass();
  rep.returns = return_prob_norm_estimate(mu, steps);
  rep.return_estimate = rep.returns.r.empty() ? 0.0 : rep.returns.r.back();
  rep.gap = std::abs(rep.lattice.value - rep.return_estimate);
  return rep;
}

EnvelopeFit fit_envelope_constant(const std::vector<std::pair<int, double>>& values,
                                  double delta, double log_coefficient) {
  EnvelopeFit fit;
  fit.constant = std::numeric_limits<double>::lowest();
  for (const auto& [n, v] : values) {
    const double lower = delta * n - log_coefficient * std::log(static_cast<double>(n));
    fit.constant = std::max(fit.constant, lower - v);
    if (v > delta * n + 1e-12) fit.upper_violations.push_back(n);
  }
  if (values.empty()) fit.constant = 0.0;
  return fit;
}

}  // namespace shrink
