#include "shrink/diophantine.hpp"

#include "parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace shrink {

namespace {

using i128 = __int128;

// Real-mode atoms sharing a cell of side 2^-47 per coordinate are merged.
constexpr int kMergeShift = 128 - 47;

BigInt lcm_big(const BigInt& a, const BigInt& b) { return a / gcd(a, b) * b; }

long double fixed_to_long_double(u128 x) noexcept {
  return static_cast<long double>(static_cast<std::uint64_t>(x >> 64)) * 0x1p-64L +
         static_cast<long double>(static_cast<std::uint64_t>(x)) * 0x1p-128L;
}

u128 signed_to_u128(long long v) noexcept {
  return static_cast<u128>(static_cast<i128>(v));
}

// Merge key of one atom: exact fixed coordinates, or their 2^-47 cells.
std::vector<u128> merge_key(const TorusPoint& p, bool exact) {
  std::vector<u128> k = p.fixed_coords();
  if (!exact) {
    for (auto& v : k) v >>= kMergeShift;
  }
  return k;
}

TorusPoint as_real(const TorusPoint& p) {
  if (!p.is_exact()) return p;
  return TorusPoint::real(p.fixed_coords(), 0x1p-128);
}

// Sorts atoms by merge key and sums the numerators of equal keys.
void merge_sorted(std::vector<TorusPoint>& points, std::vector<BigInt>& nums, bool exact) {
  const std::size_t n = points.size();
  std::vector<std::vector<u128>> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = merge_key(points[i], exact);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  std::vector<TorusPoint> out_points;
  std::vector<BigInt> out_nums;
  out_points.reserve(n);
  out_nums.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    if (!out_points.empty() && keys[i] == keys[order[k - 1]]) {
      if (exact && out_points.back().rational_coords() != points[i].rational_coords()) {
        throw std::logic_error("distinct rational atoms share a 128-bit grid point");
      }
      out_nums.back() += nums[i];
      if (!exact && points[i].error() > out_points.back().error()) {
        out_points.back() = TorusPoint::real(out_points.back().fixed_coords(), points[i].error());
      }
      continue;
    }
    out_points.push_back(std::move(points[i]));
    out_nums.push_back(std::move(nums[i]));
  }
  points = std::move(out_points);
  nums = std::move(out_nums);
}

double phase_angle(u128 phase) noexcept {
  return 2.0 * std::numbers::pi * fixed_to_double(phase);
}

}  // namespace

// --- TorusAtomicMeasure -------------------------------------------------------------

TorusAtomicMeasure::TorusAtomicMeasure(std::vector<TorusPoint> points,
                                       std::vector<Rational> weights) {
  if (points.empty()) throw std::invalid_argument("torus measure needs at least one atom");
  if (points.size() != weights.size()) {
    throw std::invalid_argument("torus measure: point and weight counts differ");
  }
  const std::size_t d = points.front().dim();
  Rational total = 0;
  BigInt den = 1;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].dim() != d) throw DimensionMismatch("torus measure atoms differ in dimension");
    if (weights[i] <= 0) throw std::invalid_argument("torus measure weights must be positive");
    total += weights[i];
    den = lcm_big(den, boost::multiprecision::denominator(weights[i]));
  }
  if (total != 1) throw std::invalid_argument("torus measure weights must sum to 1");
  exact_ = std::all_of(points.begin(), points.end(), [](const TorusPoint& p) { return p.is_exact(); });
  if (!exact_) {
    for (auto& p : points) p = as_real(p);
  }
  std::vector<BigInt> nums(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    nums[i] = boost::multiprecision::numerator(weights[i]) *
              (den / boost::multiprecision::denominator(weights[i]));
  }
  merge_sorted(points, nums, exact_);
  points_ = std::move(points);
  numerators_ = std::move(nums);
  denominator_ = den;
}

TorusAtomicMeasure::TorusAtomicMeasure(Raw, std::vector<TorusPoint> points,
                                       std::vector<BigInt> numerators, BigInt denominator)
    : points_(std::move(points)),
      numerators_(std::move(numerators)),
      denominator_(std::move(denominator)) {
  exact_ = std::all_of(points_.begin(), points_.end(), [](const TorusPoint& p) { return p.is_exact(); });
}

TorusAtomicMeasure TorusAtomicMeasure::point_mass(TorusPoint x) {
  return TorusAtomicMeasure({std::move(x)}, {Rational(1)});
}

TorusAtomicMeasure TorusAtomicMeasure::uniform_grid(int q, std::size_t dim) {
  if (q < 1 || dim < 1) throw std::invalid_argument("uniform_grid needs q >= 1 and dim >= 1");
  std::size_t count = 1;
  for (std::size_t i = 0; i < dim; ++i) count *= static_cast<std::size_t>(q);
  std::vector<TorusPoint> pts;
  pts.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<Rational> c(dim);
    std::size_t r = k;
    for (std::size_t i = dim; i-- > 0;) {
      c[i] = Rational(static_cast<long long>(r % q), q);
      r /= q;
    }
    pts.push_back(TorusPoint::exact(std::move(c)));
  }
  std::vector<Rational> w(count, Rational(1, static_cast<long long>(count)));
  return TorusAtomicMeasure(std::move(pts), std::move(w));
}

Rational TorusAtomicMeasure::weight(std::size_t i) const {
  return Rational(numerators_.at(i), denominator_);
}

double TorusAtomicMeasure::weight_double(std::size_t i) const {
  return static_cast<double>(weight(i));
}

double TorusAtomicMeasure::max_error() const noexcept {
  double e = 0.0;
  for (const auto& p : points_) e = std::max(e, p.error());
  return e;
}

// --- walk distribution -------------------------------------------------------------

TorusAtomicMeasure walk_distribution(const AtomicMeasure& mu, const TorusPoint& x, int steps,
                                     std::size_t max_atoms) {
  if (steps < 0) throw std::invalid_argument("walk_distribution needs steps >= 0");
  if (mu.dim() != x.dim()) throw DimensionMismatch("measure and point dimensions differ");
  const std::size_t d = x.dim();
  BigInt den_mu = 1;
  for (const auto& w : mu.weights()) den_mu = lcm_big(den_mu, denominator(w));
  std::vector<BigInt> coeff;
  for (const auto& w : mu.weights()) coeff.push_back(numerator(w) * (den_mu / denominator(w)));

  const bool exact = x.is_exact();
  // Real mode: matrices mod 2^128 and worst row l1 norms, computed once.
  std::vector<std::vector<u128>> mod;
  std::vector<double> row_l1;
  if (!exact) {
    for (const auto& g : mu.support()) {
      std::vector<u128> m(d * d);
      double worst = 0;
      for (std::size_t i = 0; i < d; ++i) {
        double row = 0;
        for (std::size_t j = 0; j < d; ++j) {
          m[i * d + j] = bigint_mod_2_128(g.at(i, j));
          row += abs(g.at(i, j)).convert_to<double>();
        }
        worst = std::max(worst, row);
      }
      mod.push_back(std::move(m));
      row_l1.push_back(worst * (1 + 1e-12));
    }
  }

  std::vector<TorusPoint> points{x};
  std::vector<BigInt> nums{BigInt(1)};
  BigInt den = 1;
  for (int s = 1; s <= steps; ++s) {
    const std::size_t next_size = points.size() * mu.size();
    std::vector<TorusPoint> next;
    std::vector<BigInt> next_nums;
    next.reserve(next_size);
    next_nums.reserve(next_size);
    for (std::size_t j = 0; j < points.size(); ++j) {
      for (std::size_t a = 0; a < mu.size(); ++a) {
        if (exact) {
          next.push_back(act(mu.support()[a], points[j]));
        } else {
          const auto& X = points[j].fixed_coords();
          std::vector<u128> y(d, 0);
          for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t k = 0; k < d; ++k) y[i] += mod[a][i * d + k] * X[k];
          }
          next.push_back(TorusPoint::real(std::move(y), points[j].error() * row_l1[a]));
        }
        next_nums.push_back(nums[j] * coeff[a]);
      }
    }
    merge_sorted(next, next_nums, exact);
    if (next.size() > max_atoms) {
      throw BudgetExceeded("walk support has " + std::to_string(next.size()) +
                               " atoms at step " + std::to_string(s) + ", budget " +
                               std::to_string(max_atoms),
                           s - 1, {});
    }
    points = std::move(next);
    nums = std::move(next_nums);
    den *= den_mu;
  }
  return TorusAtomicMeasure(TorusAtomicMeasure::Raw{}, std::move(points), std::move(nums), den);
}

// --- Fourier coefficients --------------------------------------------------------------

std::complex<double> fourier_coefficient(const TorusAtomicMeasure& nu,
                                         const std::vector<long long>& b) {
  if (b.size() != nu.dim()) throw DimensionMismatch("frequency and measure dimensions differ");
  long double re = 0, im = 0;
  const long double den = nu.denominator().convert_to<long double>();
  for (std::size_t j = 0; j < nu.size(); ++j) {
    u128 phase = 0;
    const auto& X = nu.point(j).fixed_coords();
    for (std::size_t i = 0; i < b.size(); ++i) phase += signed_to_u128(b[i]) * X[i];
    const long double angle = 2.0L * std::numbers::pi_v<long double> * fixed_to_long_double(phase);
    const long double w = nu.numerator(j).convert_to<long double>() / den;
    re += w * std::cos(angle);
    im += w * std::sin(angle);
  }
  return {static_cast<double>(re), static_cast<double>(im)};
}

double FourierTable::at(const std::vector<long long>& b) const {
  if (b.size() != dim) throw DimensionMismatch("frequency dimension does not match table");
  std::size_t idx = 0;
  const std::size_t side = 2 * static_cast<std::size_t>(window) + 1;
  for (long long v : b) {
    if (v < -window || v > window) throw std::out_of_range("frequency outside the table window");
    idx = idx * side + static_cast<std::size_t>(v + window);
  }
  return modulus[idx];
}

FourierTable fourier_table(const TorusAtomicMeasure& nu, int window, unsigned threads) {
  if (window < 1) throw std::invalid_argument("Fourier window B must be at least 1");
  FourierTable t;
  t.window = window;
  t.dim = nu.dim();
  const std::size_t side = 2 * static_cast<std::size_t>(window) + 1;
  std::size_t total = 1;
  for (std::size_t i = 0; i < t.dim; ++i) total *= side;
  t.modulus.assign(total, 0.0);

  if (t.dim == 2) {
    // nu^(b1, b2) = sum_j w_j e(b1 x_j) e(b2 y_j): a product E1^T E2 of
    // per-coordinate character matrices, accumulated over atom blocks. Only
    // b1 >= 0 is computed; nu^(-b) is the conjugate of nu^(b).
    using Mat = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;
    const std::size_t half = static_cast<std::size_t>(window) + 1;
    const std::size_t n = nu.size();
    const std::size_t rows = 2048;
    const std::size_t blocks = std::min<std::size_t>(16, (n + rows - 1) / rows);
    const auto parts = detail::make_chunks(n, (n + blocks - 1) / blocks);
    std::vector<Mat> partial(parts.size(), Mat::Zero(half, side));
    detail::for_each_chunk(parts, threads, [&](const detail::Chunk& part) {
      Mat e1(rows, half), e2(rows, side);
      for (std::size_t begin = part.begin; begin < part.end; begin += rows) {
        const std::size_t m = std::min(rows, part.end - begin);
        e1.setZero();
        e2.setZero();
        for (std::size_t r = 0; r < m; ++r) {
          const std::size_t j = begin + r;
          const auto& X = nu.point(j).fixed_coords();
          const double w = nu.weight_double(j);
          for (std::size_t k = 0; k < half; ++k) {
            e1(r, k) = std::polar(w, phase_angle(static_cast<u128>(k) * X[0]));
          }
          for (std::size_t k = 0; k < side; ++k) {
            const u128 f = signed_to_u128(static_cast<long long>(k) - window);
            e2(r, k) = std::polar(1.0, phase_angle(f * X[1]));
          }
        }
        partial[part.index].noalias() += e1.transpose() * e2;
      }
    });
    Mat sum = Mat::Zero(half, side);
    for (const auto& p : partial) sum += p;
    for (std::size_t a = 0; a < half; ++a) {
      for (std::size_t b = 0; b < side; ++b) {
        const double v = std::abs(sum(a, b));
        t.modulus[(a + window) * side + b] = v;
        t.modulus[(window - a) * side + (side - 1 - b)] = v;
      }
    }
    return t;
  }
  const auto chunks = detail::make_chunks(total, 64);
  detail::for_each_chunk(chunks, threads, [&](const detail::Chunk& c) {
    std::vector<long long> b(t.dim);
    for (std::size_t idx = c.begin; idx < c.end; ++idx) {
      std::size_t r = idx;
      for (std::size_t i = t.dim; i-- > 0;) {
        b[i] = static_cast<long long>(r % side) - window;
        r /= side;
      }
      t.modulus[idx] = std::abs(fourier_coefficient(nu, b));
    }
  });
  return t;
}

MaxFourier max_fourier(const FourierTable& table) {
  MaxFourier best;
  best.value = -1.0;
  const std::size_t side = 2 * static_cast<std::size_t>(table.window) + 1;
  const std::size_t zero = (table.modulus.size() - 1) / 2;
  for (std::size_t idx = 0; idx < table.modulus.size(); ++idx) {
    if (idx == zero || table.modulus[idx] <= best.value) continue;
    best.value = table.modulus[idx];
    best.argmax.assign(table.dim, 0);
    std::size_t r = idx;
    for (std::size_t i = table.dim; i-- > 0;) {
      best.argmax[i] = static_cast<long long>(r % side) - table.window;
      r /= side;
    }
  }
  return best;
}

MaxFourier max_fourier(const TorusAtomicMeasure& nu, int window, unsigned threads) {
  return max_fourier(fourier_table(nu, window, threads));
}

EtkBound etk_bound(const FourierTable& table) {
  EtkBound out;
  out.window = table.window;
  out.constant = std::pow(1.5, static_cast<double>(table.dim));
  const std::size_t side = 2 * static_cast<std::size_t>(table.window) + 1;
  const std::size_t zero = (table.modulus.size() - 1) / 2;
  double sum = 0.0;
  for (std::size_t idx = 0; idx < table.modulus.size(); ++idx) {
    if (idx == zero) continue;
    double r_b = 1.0;
    std::size_t r = idx;
    for (std::size_t i = 0; i < table.dim; ++i) {
      const long long b = static_cast<long long>(r % side) - table.window;
      r /= side;
      r_b *= std::max<double>(1.0, static_cast<double>(std::llabs(b)));
    }
    sum += table.modulus[idx] / r_b;
  }
  out.fourier_sum = sum;
  out.value = out.constant * (1.0 / table.window + sum);
  return out;
}

EtkBound etk_bound(const TorusAtomicMeasure& nu, int window, unsigned threads) {
  return etk_bound(fourier_table(nu, window, threads));
}

// --- discrepancy --------------------------------------------------------------------

namespace {

// Arithmetic for the corner search. Coordinates are integers X = x * Q and
// masses integers n = w * W (exact mode), or doubles with Q = W = 1.
// The scaled objective is mass * Q^2 - area * W.
template <class T>
struct Planar {
  std::vector<T> x, y;   // coordinates in units 1/Q
  std::vector<T> mass;   // in units 1/W
  T one;                 // Q
  T mass_scale;          // Q^2
  T area_scale;          // W
};

template <class T>
struct Best {
  T value{};
  bool set = false;
  T lo0{}, hi0{}, lo1{}, hi1{};
  void offer(T v, T a, T b, T c, T d) {
    if (!set || v > value) {
      value = v;
      set = true;
      lo0 = a;
      hi0 = b;
      lo1 = c;
      hi1 = d;
    }
  }
};

template <class T>
struct Columns {
  std::vector<T> xs;                            // distinct x, ascending
  std::vector<std::vector<std::size_t>> atoms;  // atoms per column
  std::vector<T> ys;                            // distinct y, ascending
  std::vector<std::size_t> y_rank;              // rank of each atom's y
};

template <class T>
Columns<T> columns_of(const Planar<T>& p) {
  Columns<T> c;
  c.xs = p.x;
  std::sort(c.xs.begin(), c.xs.end());
  c.xs.erase(std::unique(c.xs.begin(), c.xs.end()), c.xs.end());
  c.ys = p.y;
  std::sort(c.ys.begin(), c.ys.end());
  c.ys.erase(std::unique(c.ys.begin(), c.ys.end()), c.ys.end());
  c.atoms.assign(c.xs.size(), {});
  c.y_rank.resize(p.x.size());
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    const auto cx = std::lower_bound(c.xs.begin(), c.xs.end(), p.x[i]) - c.xs.begin();
    c.atoms[cx].push_back(i);
    c.y_rank[i] = std::lower_bound(c.ys.begin(), c.ys.end(), p.y[i]) - c.ys.begin();
  }
  return c;
}

// Inserts the atoms of one column into a strip: per-rank masses plus the
// sorted list of occupied ranks.
template <class T>
void add_column(const Planar<T>& p, const Columns<T>& c, std::size_t col, std::vector<T>& strip,
                std::vector<std::size_t>& occupied) {
  for (std::size_t a : c.atoms[col]) {
    const std::size_t r = c.y_rank[a];
    if (strip[r] == T(0)) occupied.insert(std::lower_bound(occupied.begin(), occupied.end(), r), r);
    strip[r] += p.mass[a];
  }
}

// Runs body(i, best) for every left edge i, in parallel chunks merged in
// chunk order (the first maximum wins for every thread count).
template <class T, class Body>
Best<T> over_left_edges(std::size_t count, unsigned threads, Body&& body) {
  const auto chunks = detail::make_chunks(count, 8);
  std::vector<Best<T>> partial(chunks.size());
  detail::for_each_chunk(chunks, threads, [&](const detail::Chunk& ch) {
    for (std::size_t i = ch.begin; i < ch.end; ++i) body(i, partial[ch.index]);
  });
  Best<T> best;
  for (const auto& b : partial) {
    if (b.set) best.offer(b.value, b.lo0, b.hi0, b.lo1, b.hi1);
  }
  return best;
}

// sup of (mass - area) over closed boxes [xs_i, xs_j] x [ys_k, ys_l].
template <class T>
Best<T> excess_search(const Planar<T>& p, const Columns<T>& c, unsigned threads) {
  return over_left_edges<T>(c.xs.size(), threads, [&](std::size_t i, Best<T>& best) {
    std::vector<T> strip(c.ys.size(), T(0));
    std::vector<std::size_t> occupied;
    for (std::size_t j = i; j < c.xs.size(); ++j) {
      add_column(p, c, j, strip, occupied);
      const T width = (c.xs[j] - c.xs[i]) * p.area_scale;
      // max over k <= l of (S_l - width y_l) - (S_{k-1} - width y_k).
      T prefix = T(0);
      bool have = false;
      T best_low{};
      std::size_t best_low_rank = 0;
      for (std::size_t r : occupied) {
        const T low = prefix * p.mass_scale - width * c.ys[r];
        if (!have || low < best_low) {
          best_low = low;
          best_low_rank = r;
          have = true;
        }
        prefix += strip[r];
        const T high = prefix * p.mass_scale - width * c.ys[r];
        best.offer(high - best_low, c.xs[i], c.xs[j], c.ys[best_low_rank], c.ys[r]);
      }
    }
  });
}

// sup of (area - mass) over boxes with x-edges in xs + {0, 1} and y-edges in
// ys + {0, 1}. half_open = false: open boxes (a, c) x (lo, hi), the limit
// value. half_open = true: [a, c) x [lo, hi), the attained value. An optimal
// y-edge sits at 0, 1 or an atom of the strip (otherwise moving it outward
// adds area and no mass), so only those are scanned.
template <class T>
Best<T> deficit_search(const Planar<T>& p, const Columns<T>& c, bool half_open,
                       unsigned threads) {
  // Edge candidates with their column index (or npos for 0 / 1 without atoms).
  constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::vector<std::pair<T, std::size_t>> cx;
  if (c.xs.empty() || c.xs.front() != T(0)) cx.push_back({T(0), npos});
  for (std::size_t i = 0; i < c.xs.size(); ++i) cx.push_back({c.xs[i], i});
  cx.push_back({p.one, npos});

  return over_left_edges<T>(cx.size() - 1, threads, [&](std::size_t i, Best<T>& best) {
    std::vector<T> strip(c.ys.size(), T(0));
    std::vector<std::size_t> occupied;
    std::vector<std::pair<T, T>> cand;  // (y, strip mass at y)
    if (half_open && cx[i].second != npos) add_column(p, c, cx[i].second, strip, occupied);
    for (std::size_t j = i + 1; j < cx.size(); ++j) {
      if (j > i + 1 && cx[j - 1].second != npos) add_column(p, c, cx[j - 1].second, strip, occupied);
      const T width = (cx[j].first - cx[i].first) * p.area_scale;
      cand.clear();
      if (occupied.empty() || c.ys[occupied.front()] != T(0)) cand.push_back({T(0), T(0)});
      for (std::size_t r : occupied) cand.push_back({c.ys[r], strip[r]});
      cand.push_back({p.one, T(0)});
      // Open: value(p, q) = width (c_q - c_p) - mass strictly between.
      // Half-open: value(p, q) = width (c_q - c_p) - mass in [c_p, c_q).
      T below = T(0);  // mass of candidates strictly before the current one
      bool have = false;
      T best_low{};
      T best_low_y{};
      for (const auto& [y, m_here] : cand) {
        const T high = width * y - below * p.mass_scale;
        if (have) best.offer(high - best_low, cx[i].first, cx[j].first, best_low_y, y);
        const T low = half_open ? high : high - m_here * p.mass_scale;
        if (!have || low < best_low) {
          best_low = low;
          best_low_y = y;
          have = true;
        }
        below += m_here;
      }
    }
  });
}

template <class T>
DiscrepancyResult corner_search(const Planar<T>& p, const std::function<double(T)>& to_value,
                                const std::function<double(T)>& to_coord, unsigned threads,
                                T* winning = nullptr) {
  const Columns<T> c = columns_of(p);
  const Best<T> plus = excess_search(p, c, threads);
  const Best<T> minus = deficit_search(p, c, false, threads);
  const Best<T> minus_half = deficit_search(p, c, true, threads);
  DiscrepancyResult r;
  const bool excess_wins = plus.set && (!minus.set || plus.value > minus.value);
  const Best<T>& win = excess_wins ? plus : minus;
  r.value = to_value(win.value);
  if (winning) *winning = win.value;
  r.attained = minus_half.set && !(minus_half.value < win.value);
  r.witness.closed = excess_wins;
  r.witness.lo = {to_coord(win.lo0), to_coord(win.lo1)};
  r.witness.hi = {to_coord(win.hi0), to_coord(win.hi1)};
  return r;
}

// Grid fallback: exact sup of |nu - m| over half-open boxes with corners on
// the (1/G) grid, by Kadane over row bands.
DiscrepancyResult grid_discrepancy(const TorusAtomicMeasure& nu, int G) {
  const std::size_t g = static_cast<std::size_t>(G);
  std::vector<long double> cell(g * g, 0.0L);
  const long double den = nu.denominator().convert_to<long double>();
  for (std::size_t j = 0; j < nu.size(); ++j) {
    const auto& X = nu.point(j).fixed_coords();
    const auto cx = static_cast<std::size_t>(fixed_to_long_double(X[0]) * G);
    const auto cy = static_cast<std::size_t>(fixed_to_long_double(X[1]) * G);
    cell[std::min(cx, g - 1) * g + std::min(cy, g - 1)] +=
        nu.numerator(j).convert_to<long double>() / den;
  }
  const long double area = 1.0L / (static_cast<long double>(G) * G);
  long double best = 0.0L;
  std::size_t bi = 0, bj = 0, bk = 0, bl = 0;
  bool bclosed = true;
  std::vector<long double> band(g);
  for (std::size_t i = 0; i < g; ++i) {
    std::fill(band.begin(), band.end(), 0.0L);
    for (std::size_t j = i; j < g; ++j) {
      for (std::size_t y = 0; y < g; ++y) band[y] += cell[j * g + y] - area;
      for (int sign : {1, -1}) {
        long double run = 0.0L;
        std::size_t start = 0;
        for (std::size_t y = 0; y < g; ++y) {
          if (run <= 0.0L) {
            run = 0.0L;
            start = y;
          }
          run += sign * band[y];
          if (run > best) {
            best = run;
            bi = i;
            bj = j + 1;
            bk = start;
            bl = y + 1;
            bclosed = sign > 0;
          }
        }
      }
    }
  }
  DiscrepancyResult r;
  r.value = static_cast<double>(best);
  r.approximate = true;
  r.error_bound = 2.0 * 2 / G;
  r.attained = true;
  r.witness.closed = bclosed;
  r.witness.lo = {static_cast<double>(bi) / G, static_cast<double>(bk) / G};
  r.witness.hi = {static_cast<double>(bj) / G, static_cast<double>(bl) / G};
  return r;
}

}  // namespace

DiscrepancyResult discrepancy(const TorusAtomicMeasure& nu, const DiscrepancyConfig& cfg) {
  if (nu.dim() != 2) throw DimensionMismatch("discrepancy is implemented for d = 2");
  if (nu.size() > cfg.max_exact_atoms) {
    if (cfg.grid_cells < 1) throw std::invalid_argument("grid_cells must be positive");
    return grid_discrepancy(nu, cfg.grid_cells);
  }
  const std::size_t n = nu.size();
  if (nu.is_exact()) {
    BigInt Q = 1;
    for (const auto& p : nu.points()) {
      for (const auto& c : p.rational_coords()) Q = lcm_big(Q, denominator(c));
    }
    const BigInt& W = nu.denominator();
    const BigInt limit = BigInt(1) << 100;
    if (Q <= (BigInt(1) << 40) && Q * Q * W < limit) {
      Planar<i128> p;
      const auto q64 = static_cast<long long>(Q);
      const auto w64 = static_cast<long long>(W);
      p.one = q64;
      p.mass_scale = static_cast<i128>(q64) * q64;
      p.area_scale = w64;
      for (std::size_t j = 0; j < n; ++j) {
        const auto& rc = nu.point(j).rational_coords();
        p.x.push_back(static_cast<long long>(numerator(rc[0]) * (Q / denominator(rc[0]))));
        p.y.push_back(static_cast<long long>(numerator(rc[1]) * (Q / denominator(rc[1]))));
        p.mass.push_back(static_cast<long long>(nu.numerator(j)));
      }
      const BigInt scale = Q * Q * W;
      const double scale_d = scale.convert_to<double>();
      i128 win = 0;
      auto r = corner_search<i128>(
          p, [&](i128 v) { return static_cast<double>(v) / scale_d; },
          [&](i128 v) { return static_cast<double>(v) / static_cast<double>(q64); }, cfg.threads,
          &win);
      const bool neg = win < 0;
      u128 mag = neg ? static_cast<u128>(-win) : static_cast<u128>(win);
      BigInt num = static_cast<std::uint64_t>(mag >> 64);
      num = (num << 64) + static_cast<std::uint64_t>(mag);
      r.exact = Rational(neg ? BigInt(-num) : num, scale);
      r.value = static_cast<double>(*r.exact);
      return r;
    }
  }
  Planar<double> p;
  p.one = 1.0;
  p.mass_scale = 1.0;
  p.area_scale = 1.0;
  const long double den = nu.denominator().convert_to<long double>();
  for (std::size_t j = 0; j < n; ++j) {
    const auto& X = nu.point(j).fixed_coords();
    p.x.push_back(fixed_to_double(X[0]));
    p.y.push_back(fixed_to_double(X[1]));
    p.mass.push_back(static_cast<double>(nu.numerator(j).convert_to<long double>() / den));
  }
  return corner_search<double>(
      p, [](double v) { return v; }, [](double v) { return v; }, cfg.threads);
}

// --- Diophantine type -----------------------------------------------------------------

std::string DiophantineVerdict::summary() const {
  std::ostringstream s;
  if (rational_denominator && std::isinf(m_estimate)) {
    s << "rational (M = inf at q = " << *rational_denominator << ")";
    return s.str();
  }
  s << "M(Q) = " << m_estimate;
  if (!witnesses.empty()) s << " at q = " << witnesses.back().q;
  s << " (Q = " << cutoff << ")";
  if (resolution_limited) s << ", resolution limited";
  return s.str();
}

DiophantineVerdict diophantine_type(const TorusPoint& x, std::int64_t cutoff) {
  if (cutoff < 2) throw std::invalid_argument("diophantine_type needs a cutoff Q >= 2");
  DiophantineVerdict v;
  v.cutoff = cutoff;
  v.m_estimate = -std::numeric_limits<double>::infinity();
  if (x.is_exact()) {
    BigInt D = 1;
    for (const auto& c : x.rational_coords()) D = lcm_big(D, denominator(c));
    v.rational_denominator = D;
  }
  const double err = x.error();
  for (std::int64_t q = 2; q <= cutoff; ++q) {
    double dist = 0.0;
    bool exact_zero = true;
    if (x.is_exact()) {
      for (const auto& c : x.rational_coords()) {
        const Rational t = c * q;
        const BigInt fl = numerator(t) / denominator(t);
        Rational f = t - Rational(fl);
        if (f > Rational(1, 2)) f = 1 - f;
        if (f != 0) exact_zero = false;
        dist = std::max(dist, static_cast<double>(f) / static_cast<double>(q));
      }
    } else {
      exact_zero = false;
      for (const u128 X : x.fixed_coords()) {
        const u128 t = static_cast<u128>(q) * X;
        const u128 near = std::min(t, static_cast<u128>(0) - t);
        dist = std::max(dist, fixed_to_double(near) / static_cast<double>(q));
      }
      if (dist <= err) {
        v.resolution_limited = true;
        dist = err;
      }
    }
    if (exact_zero) {
      v.m_estimate = std::numeric_limits<double>::infinity();
      v.witnesses.push_back({q, 0.0, std::numeric_limits<double>::infinity()});
      break;
    }
    const double m = -std::log(dist) / std::log(static_cast<double>(q));
    if (m > v.m_estimate) {
      v.m_estimate = m;
      v.witnesses.push_back({q, dist, m});
    }
  }
  return v;
}

// --- fast approximation -------------------------------------------------------------------

ApproximationProfile fast_approx_scan(const BallIndex& ball, const TorusPoint& x,
                                      const TorusPoint& y, std::int64_t diophantine_cutoff) {
  if (ball.presentation().dim() != 2 || x.dim() != 2 || y.dim() != 2) {
    throw DimensionMismatch("fast_approx_scan works on the 2-torus");
  }
  ApproximationProfile prof;
  const int R = ball.radius();
  const double ninf = -std::numeric_limits<double>::infinity();
  prof.shell_best.assign(R + 1, ninf);
  for (const auto& e : ball.elements()) {
    if (e.radius == 0) continue;
    const BigInt f = e.element.frobenius_sq();
    if (f <= 2) continue;  // ||g|| = 1
    const double fd = f.convert_to<double>();
    const double log_norm = 0.5 * std::log((fd + std::sqrt((fd - 2.0) * (fd + 2.0))) / 2.0);
    const TorusPoint z = act(e.element, x);
    double dist = torus_dist(z, y, TorusNorm::Euclidean);
    double alpha;
    if (dist == 0.0 && z.is_exact() && y.is_exact()) {
      ++prof.exact_hits;
      alpha = std::numeric_limits<double>::infinity();
    } else {
      dist = std::max(dist, std::max(z.error(), y.error()));
      alpha = -std::log(dist) / log_norm;
    }
    prof.shell_best[e.radius] = std::max(prof.shell_best[e.radius], alpha);
  }
  prof.keep_alpha.assign(R + 1, ninf);
  double run = std::numeric_limits<double>::infinity();
  for (int n = R; n >= 1; --n) {
    run = std::min(run, prof.shell_best[n]);
    prof.keep_alpha[n] = run;
  }
  if (diophantine_cutoff > 0) prof.verdict = diophantine_type(x, diophantine_cutoff);
  return prof;
}

ApproximationProfile fast_approx_scan(const GroupPresentation& p, const TorusPoint& x,
                                      const TorusPoint& y, int max_radius,
                                      std::int64_t diophantine_cutoff,
                                      const EnumerationConfig& cfg) {
  return fast_approx_scan(enumerate_ball(p, max_radius, cfg), x, y, diophantine_cutoff);
}

double log_linear_slope(const std::vector<double>& xs, const std::vector<double>& values) {
  if (xs.size() != values.size() || xs.size() < 2) {
    throw std::invalid_argument("log_linear_slope needs two or more matched points");
  }
  double mx = 0, my = 0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(values[i] > 0)) throw std::invalid_argument("log_linear_slope needs positive values");
    mx += xs[i];
    my += std::log(values[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (std::log(values[i]) - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace shrink
