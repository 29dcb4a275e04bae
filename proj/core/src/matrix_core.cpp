#include "shrink/matrix_core.hpp"

#include <gmp.h>
#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>

namespace shrink {

namespace {

// Owning MPFR value.
class Mpfr {
 public:
  explicit Mpfr(mpfr_prec_t prec) { mpfr_init2(v_, prec); }
  ~Mpfr() { mpfr_clear(v_); }
  Mpfr(const Mpfr&) = delete;
  Mpfr& operator=(const Mpfr&) = delete;
  mpfr_ptr get() { return v_; }
  mpfr_srcptr get() const { return v_; }

 private:
  mpfr_t v_;
};

void set_nonnegative(mpfr_ptr r, const BigInt& x, mpfr_rnd_t rnd) {
  if (x <= std::numeric_limits<std::uint64_t>::max()) {
    mpfr_set_uj(r, static_cast<std::uint64_t>(x), rnd);
  } else {
    const std::string s = x.str();
    mpfr_set_str(r, s.c_str(), 10, rnd);
  }
}

BigInt floor_to_bigint(mpfr_srcptr x) {
  mpz_t z;
  mpz_init(z);
  mpfr_get_z(z, x, MPFR_RNDD);
  char* s = mpz_get_str(nullptr, 10, z);
  BigInt out(s);
  void (*freefunc)(void*, size_t);
  mp_get_memory_functions(nullptr, nullptr, &freefunc);
  freefunc(s, std::char_traits<char>::length(s) + 1);
  mpz_clear(z);
  return out;
}

// One directed evaluation of log sigma_max^2 = log((F + sqrt(F^2 - 4)) / 2),
// which is 2 log sigma_max.
double displacement_bound(const BigInt& f, const BigInt& disc, mpfr_prec_t prec,
                          mpfr_rnd_t rnd) {
  Mpfr a(prec), b(prec);
  set_nonnegative(a.get(), disc, rnd);
  mpfr_sqrt(a.get(), a.get(), rnd);
  set_nonnegative(b.get(), f, rnd);
  mpfr_add(a.get(), a.get(), b.get(), rnd);
  mpfr_div_ui(a.get(), a.get(), 2, rnd);
  mpfr_log(a.get(), a.get(), rnd);
  return mpfr_get_d(a.get(), rnd);
}

std::size_t hash_bigint(const BigInt& x) noexcept {
  const auto& be = x.backend();
  std::size_t h = be.sign() ? 0x9e3779b97f4a7c15ULL : 0x51ed270b27a3ab31ULL;
  for (unsigned i = 0; i < be.size(); ++i) {
    h ^= static_cast<std::size_t>(be.limbs()[i]) + 0x9e3779b97f4a7c15ULL +
         (h << 6) + (h >> 2);
  }
  return h;
}

std::string letter(int signed_index) {
  const int k = std::abs(signed_index);
  if (k >= 1 && k <= 26) {
    const char base = signed_index > 0 ? 'a' : 'A';
    return std::string(1, static_cast<char>(base + k - 1));
  }
  return "g" + std::to_string(k) + (signed_index < 0 ? "^-1" : "");
}

BigInt parse_entry(const nlohmann::json& v) {
  if (v.is_string()) return BigInt(v.get<std::string>());
  if (v.is_number_integer()) return BigInt(v.get<long long>());
  throw std::invalid_argument("matrix entry must be an integer or decimal string");
}

}  // namespace

// --- words ------------------------------------------------------------------

Word freely_reduce(Word w) {
  Word out;
  out.reserve(w.size());
  for (int x : w) {
    if (!out.empty() && out.back() == -x) {
      out.pop_back();
    } else {
      out.push_back(x);
    }
  }
  return out;
}

Word invert_word(const Word& w) {
  Word out(w.rbegin(), w.rend());
  for (int& x : out) x = -x;
  return out;
}

std::string word_to_string(const Word& w) {
  if (w.empty()) return "e";
  std::string s;
  for (int x : w) s += letter(x);
  return s;
}

// --- GroupElement --------------------------------------------------------

BigInt determinant(std::size_t dim, std::span<const BigInt> entries) {
  if (entries.size() != dim * dim) {
    throw DimensionMismatch("entry count does not match dimension");
  }
  if (dim == 1) return entries[0];
  if (dim == 2) return entries[0] * entries[3] - entries[1] * entries[2];
  // Bareiss fraction-free elimination.
  std::vector<BigInt> m(entries.begin(), entries.end());
  auto at = [&](std::size_t i, std::size_t j) -> BigInt& { return m[i * dim + j]; };
  BigInt prev = 1;
  int sign = 1;
  for (std::size_t k = 0; k + 1 < dim; ++k) {
    if (at(k, k) == 0) {
      std::size_t p = k + 1;
      while (p < dim && at(p, k) == 0) ++p;
      if (p == dim) return 0;
      for (std::size_t j = 0; j < dim; ++j) std::swap(at(k, j), at(p, j));
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < dim; ++i) {
      for (std::size_t j = k + 1; j < dim; ++j) {
        at(i, j) = (at(i, j) * at(k, k) - at(i, k) * at(k, j)) / prev;
      }
    }
    prev = at(k, k);
  }
  return sign * at(dim - 1, dim - 1);
}

GroupElement::GroupElement(std::size_t dim, std::vector<BigInt> entries,
                           std::optional<Word> word)
    : dim_(dim), entries_(std::move(entries)), word_(std::move(word)) {
  if (dim_ == 0 || entries_.size() != dim_ * dim_) {
    throw DimensionMismatch("GroupElement needs dim*dim entries");
  }
  if (determinant(dim_, entries_) != 1) {
    throw NotUnimodular("determinant is not 1: " + to_string());
  }
}

GroupElement::GroupElement(Unchecked, std::size_t dim,
                           std::vector<BigInt> entries, std::optional<Word> word)
    : dim_(dim), entries_(std::move(entries)), word_(std::move(word)) {}

GroupElement GroupElement::identity(std::size_t dim) {
  std::vector<BigInt> e(dim * dim);
  for (std::size_t i = 0; i < dim; ++i) e[i * dim + i] = 1;
  return GroupElement(Unchecked{}, dim, std::move(e), Word{});
}

GroupElement GroupElement::from_rows(
    std::initializer_list<std::initializer_list<long long>> rows,
    std::optional<Word> word) {
  const std::size_t dim = rows.size();
  std::vector<BigInt> e;
  e.reserve(dim * dim);
  for (const auto& row : rows) {
    if (row.size() != dim) throw DimensionMismatch("matrix is not square");
    for (long long x : row) e.emplace_back(x);
  }
  return GroupElement(dim, std::move(e), std::move(word));
}

GroupElement GroupElement::with_word(std::optional<Word> word) const {
  return GroupElement(Unchecked{}, dim_, entries_, std::move(word));
}

GroupElement GroupElement::inverse() const {
  std::optional<Word> w;
  if (word_) w = invert_word(*word_);
  if (dim_ == 2) {
    return GroupElement(Unchecked{}, 2,
                        {entries_[3], -entries_[1], -entries_[2], entries_[0]},
                        std::move(w));
  }
  // Gauss-Jordan over Q; the result is integral because det == 1.
  const std::size_t n = dim_;
  std::vector<Rational> a(n * 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i * 2 * n + j] = Rational(at(i, j));
    a[i * 2 * n + n + i] = 1;
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    while (a[p * 2 * n + c] == 0) ++p;
    if (p != c) {
      for (std::size_t j = 0; j < 2 * n; ++j) std::swap(a[p * 2 * n + j], a[c * 2 * n + j]);
    }
    const Rational piv = a[c * 2 * n + c];
    for (std::size_t j = 0; j < 2 * n; ++j) a[c * 2 * n + j] /= piv;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == c || a[i * 2 * n + c] == 0) continue;
      const Rational f = a[i * 2 * n + c];
      for (std::size_t j = 0; j < 2 * n; ++j) a[i * 2 * n + j] -= f * a[c * 2 * n + j];
    }
  }
  std::vector<BigInt> e(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) e[i * n + j] = numerator(a[i * 2 * n + n + j]);
  }
  return GroupElement(Unchecked{}, n, std::move(e), std::move(w));
}

GroupElement GroupElement::negated() const {
  std::vector<BigInt> e(entries_.size());
  std::transform(entries_.begin(), entries_.end(), e.begin(),
                 [](const BigInt& x) { return BigInt(-x); });
  if (dim_ % 2 == 1) {
    throw NotUnimodular("-g has determinant -1 in odd dimension");
  }
  return GroupElement(Unchecked{}, dim_, std::move(e), std::nullopt);
}

GroupElement GroupElement::transposed() const {
  std::vector<BigInt> e(entries_.size());
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) e[j * dim_ + i] = at(i, j);
  }
  return GroupElement(Unchecked{}, dim_, std::move(e), std::nullopt);
}

BigInt GroupElement::frobenius_sq() const {
  BigInt f = 0;
  for (const auto& x : entries_) f += x * x;
  return f;
}

BigInt GroupElement::trace() const {
  BigInt t = 0;
  for (std::size_t i = 0; i < dim_; ++i) t += at(i, i);
  return t;
}

bool GroupElement::is_identity() const {
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) {
      if (at(i, j) != (i == j ? 1 : 0)) return false;
    }
  }
  return true;
}

bool GroupElement::is_minus_identity() const {
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) {
      if (at(i, j) != (i == j ? -1 : 0)) return false;
    }
  }
  return true;
}

std::size_t GroupElement::hash() const noexcept {
  std::size_t h = dim_;
  for (const auto& x : entries_) {
    h ^= hash_bigint(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

std::string GroupElement::to_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dim_; ++i) {
    os << (i ? ",[" : "[");
    for (std::size_t j = 0; j < dim_; ++j) os << (j ? "," : "") << at(i, j);
    os << ']';
  }
  os << ']';
  return os.str();
}

GroupElement compose(const GroupElement& a, const GroupElement& b,
                     WordPolicy policy) {
  if (a.dim_ != b.dim_) {
    throw DimensionMismatch("compose: dimension " + std::to_string(a.dim_) +
                            " vs " + std::to_string(b.dim_));
  }
  const std::size_t n = a.dim_;
  std::vector<BigInt> e(n * n);
  if (n == 2) {
    const auto& x = a.entries_;
    const auto& y = b.entries_;
    e[0] = x[0] * y[0] + x[1] * y[2];
    e[1] = x[0] * y[1] + x[1] * y[3];
    e[2] = x[2] * y[0] + x[3] * y[2];
    e[3] = x[2] * y[1] + x[3] * y[3];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        const BigInt& aik = a.entries_[i * n + k];
        if (aik == 0) continue;
        for (std::size_t j = 0; j < n; ++j) e[i * n + j] += aik * b.entries_[k * n + j];
      }
    }
  }
  std::optional<Word> w;
  if (a.word_ && b.word_) {
    Word cat = *a.word_;
    cat.insert(cat.end(), b.word_->begin(), b.word_->end());
    w = policy == WordPolicy::FreelyReduce ? freely_reduce(std::move(cat))
                                           : std::move(cat);
  }
  return GroupElement(GroupElement::Unchecked{}, n, std::move(e), std::move(w));
}

// --- presentations ---------------------------------------------------------

GroupPresentation::GroupPresentation(std::vector<GroupElement> generators,
                                     MetricMode metric, bool freeness_assumed)
    : generators_(std::move(generators)),
      metric_(metric),
      freeness_assumed_(freeness_assumed) {
  if (generators_.empty()) {
    throw std::invalid_argument("presentation needs at least one generator");
  }
  const std::size_t d = generators_.front().dim();
  for (std::size_t i = 0; i < generators_.size(); ++i) {
    const auto& g = generators_[i];
    if (g.dim() != d) throw DimensionMismatch("generators differ in dimension");
    if (g.is_identity() || g.is_minus_identity()) {
      throw std::invalid_argument("generator " + std::to_string(i + 1) +
                                  " is +-identity");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (generators_[j] == g) {
        throw std::invalid_argument("generators " + std::to_string(j + 1) +
                                    " and " + std::to_string(i + 1) +
                                    " coincide");
      }
    }
    generators_[i] = g.with_word(Word{static_cast<int>(i + 1)});
  }
  if (metric_ == MetricMode::HyperbolicDisplacement && d != 2) {
    throw std::invalid_argument("hyperbolic displacement needs 2x2 generators");
  }
}

GroupElement GroupPresentation::generator(int signed_index) const {
  const int k = std::abs(signed_index);
  if (k < 1 || k > static_cast<int>(generators_.size())) {
    throw std::out_of_range("generator index " + std::to_string(signed_index));
  }
  const auto& g = generators_[k - 1];
  return signed_index > 0 ? g : g.inverse();
}

std::vector<GroupElement> GroupPresentation::symmetric_generators() const {
  std::vector<GroupElement> out;
  out.reserve(2 * generators_.size());
  for (std::size_t i = 0; i < generators_.size(); ++i) {
    out.push_back(generator(static_cast<int>(i + 1)));
    out.push_back(generator(-static_cast<int>(i + 1)));
  }
  return out;
}

GroupElement GroupPresentation::evaluate(const Word& w) const {
  GroupElement g = GroupElement::identity(dim());
  for (int x : w) g = compose(g, generator(x), word_policy());
  return g;
}

GroupPresentation sanov_presentation(MetricMode metric) {
  return GroupPresentation({GroupElement::from_rows({{1, 2}, {0, 1}}),
                            GroupElement::from_rows({{1, 0}, {2, 1}})},
                           metric, true);
}

nlohmann::json presentation_to_json(const GroupPresentation& p) {
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : p.generators()) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < g.dim(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t j = 0; j < g.dim(); ++j) row.push_back(g.at(i, j).str());
      rows.push_back(row);
    }
    gens.push_back(rows);
  }
  return {{"generators", gens},
          {"metric", p.metric() == MetricMode::WordLength ? "word" : "hyperbolic"},
          {"free", p.freeness_assumed()}};
}

GroupPresentation presentation_from_json(const nlohmann::json& j) {
  if (!j.contains("generators") || !j["generators"].is_array()) {
    throw std::invalid_argument("presentation: missing \"generators\" array");
  }
  std::vector<GroupElement> gens;
  for (const auto& m : j["generators"]) {
    const std::size_t d = m.size();
    std::vector<BigInt> e;
    for (const auto& row : m) {
      if (row.size() != d) throw DimensionMismatch("presentation: matrix is not square");
      for (const auto& v : row) e.push_back(parse_entry(v));
    }
    gens.emplace_back(d, std::move(e));
  }
  const std::string metric = j.value("metric", std::string("hyperbolic"));
  MetricMode mode;
  if (metric == "hyperbolic") {
    mode = MetricMode::HyperbolicDisplacement;
  } else if (metric == "word") {
    mode = MetricMode::WordLength;
  } else {
    throw std::invalid_argument("presentation: metric must be \"hyperbolic\" or \"word\"");
  }
  return GroupPresentation(std::move(gens), mode, j.value("free", false));
}

GroupPresentation load_presentation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open group file " + path.string());
  return presentation_from_json(nlohmann::json::parse(in));
}

// --- displacement and balls -------------------------------------------------

Interval displacement_from_frobenius(const BigInt& f,
                                     const DisplacementConfig& cfg) {
  if (f < 2) throw std::invalid_argument("F(g) < 2 is impossible in SL_2(Z)");
  if (f == 2) return {0.0, 0.0};
  const BigInt disc = f * f - 4;
  for (unsigned prec = cfg.initial_precision_bits;; prec *= 2) {
    Interval iv{displacement_bound(f, disc, prec, MPFR_RNDD),
                displacement_bound(f, disc, prec, MPFR_RNDU)};
    if (iv.width() < cfg.tolerance ||
        std::nextafter(iv.lo, std::numeric_limits<double>::infinity()) >= iv.hi ||
        prec >= cfg.max_precision_bits) {
      return iv;
    }
  }
}

Interval displacement(const GroupElement& g, const DisplacementConfig& cfg) {
  if (g.dim() != 2) throw DimensionMismatch("displacement is defined for SL_2");
  return displacement_from_frobenius(g.frobenius_sq(), cfg);
}

const BigInt& ball_threshold_floor(int n) {
  if (n < 0) throw std::invalid_argument("negative radius");
  static std::mutex mu;
  static std::deque<BigInt> cache;
  std::lock_guard lock(mu);
  while (static_cast<int>(cache.size()) <= n) {
    const int m = static_cast<int>(cache.size());
    if (m == 0) {
      cache.emplace_back(2);
      continue;
    }
    // e^m + e^{-m} is irrational for m >= 1, so the floors of the two
    // directed bounds agree once the precision is high enough.
    for (mpfr_prec_t prec = 64 + 2 * m;; prec *= 2) {
      Mpfr lo(prec), hi(prec), t(prec);
      mpfr_set_si(lo.get(), m, MPFR_RNDN);
      mpfr_exp(lo.get(), lo.get(), MPFR_RNDD);
      mpfr_set_si(t.get(), -m, MPFR_RNDN);
      mpfr_exp(t.get(), t.get(), MPFR_RNDD);
      mpfr_add(lo.get(), lo.get(), t.get(), MPFR_RNDD);
      mpfr_set_si(hi.get(), m, MPFR_RNDN);
      mpfr_exp(hi.get(), hi.get(), MPFR_RNDU);
      mpfr_set_si(t.get(), -m, MPFR_RNDN);
      mpfr_exp(t.get(), t.get(), MPFR_RNDU);
      mpfr_add(hi.get(), hi.get(), t.get(), MPFR_RNDU);
      BigInt flo = floor_to_bigint(lo.get());
      if (flo == floor_to_bigint(hi.get())) {
        cache.push_back(std::move(flo));
        break;
      }
    }
  }
  return cache[static_cast<std::size_t>(n)];
}

bool ball_membership(const GroupElement& g, int n) {
  if (g.dim() != 2) throw DimensionMismatch("ball_membership is defined for SL_2");
  return g.frobenius_sq() <= ball_threshold_floor(n);
}

int minimal_radius(const BigInt& f) {
  if (f <= 2) return 0;
  // log F ~ msb * ln 2; start there and walk to the exact answer.
  const double approx = static_cast<double>(boost::multiprecision::msb(f) + 1) *
                        std::log(2.0);
  int n = std::max(1, static_cast<int>(approx));
  while (n > 1 && f <= ball_threshold_floor(n - 1)) --n;
  while (f > ball_threshold_floor(n)) ++n;
  return n;
}

bool is_parabolic(const GroupElement& g) {
  if (g.dim() != 2) throw DimensionMismatch("is_parabolic is defined for SL_2");
  const BigInt t = g.trace();
  return (t == 2 || t == -2) && !g.is_identity() && !g.is_minus_identity();
}

bool in_principal_congruence_2(const GroupElement& g) {
  if (g.dim() != 2) {
    throw DimensionMismatch("in_principal_congruence_2 is defined for SL_2");
  }
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const BigInt r = g.at(i, j) - (i == j ? 1 : 0);
      if (r % 2 != 0) return false;
    }
  }
  return true;
}

}  // namespace shrink
