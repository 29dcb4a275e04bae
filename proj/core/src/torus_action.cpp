#include "shrink/torus_action.hpp"

#include "parallel.hpp"
#include "shrink/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace shrink {

namespace {

const BigInt& two_128() {
  static const BigInt v = BigInt(1) << 128;
  return v;
}

BigInt floor_div(const BigInt& a, const BigInt& b) {
  BigInt q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

Rational frac(const Rational& x) {
  return x - Rational(floor_div(numerator(x), denominator(x)));
}

u128 to_u128(const BigInt& v) {
  // v in [0, 2^128).
  const BigInt mask64 = (BigInt(1) << 64) - 1;
  const auto lo = static_cast<std::uint64_t>(v & mask64);
  const auto hi = static_cast<std::uint64_t>(v >> 64);
  return (static_cast<u128>(hi) << 64) | lo;
}

u128 rational_to_fixed(const Rational& x) {
  // x in [0, 1): floor(x 2^128).
  return to_u128(floor_div(numerator(x) << 128, denominator(x)));
}

double circular(u128 diff) noexcept {
  const u128 back = -diff;
  return fixed_to_double(std::min(diff, back));
}

// Distance between a point and a center with its absolute error bound.
struct Measured {
  double dist;
  double error;
};

Measured measure_dist(const TorusPoint& z, const TorusPoint& y, TorusNorm norm) {
  if (z.dim() != y.dim()) throw DimensionMismatch("torus points differ in dimension");
  double acc = 0.0;
  if (z.is_exact() && y.is_exact()) {
    for (std::size_t i = 0; i < z.dim(); ++i) {
      const Rational d = frac(z.rational_coords()[i] - y.rational_coords()[i]);
      const double c = std::min(d, Rational(1) - d).convert_to<double>();
      acc = norm == TorusNorm::Sup ? std::max(acc, c) : acc + c * c;
    }
    const double dist = norm == TorusNorm::Sup ? acc : std::sqrt(acc);
    return {dist, 4e-16 * dist};
  }
  for (std::size_t i = 0; i < z.dim(); ++i) {
    const double c = circular(z.fixed_coords()[i] - y.fixed_coords()[i]);
    acc = norm == TorusNorm::Sup ? std::max(acc, c) : acc + c * c;
  }
  const double dist = norm == TorusNorm::Sup ? acc : std::sqrt(acc);
  const double coord_err = z.error() + y.error() + 0x1p-126;
  const double scale = norm == TorusNorm::Sup ? 1.0 : std::sqrt(static_cast<double>(z.dim()));
  return {dist, scale * coord_err + 4e-16 * dist};
}

enum class Hit { No, Yes, Borderline };

// Compares a measured distance against a threshold interval.
Hit compare_threshold(const Measured& m, double lo, double hi, double tol) {
  const double margin = std::max(tol, m.error);
  if (m.dist < lo - margin) return Hit::Yes;
  if (m.dist > hi + margin) return Hit::No;
  return Hit::Borderline;
}

Hit in_target(const TargetFamily& t, const TorusPoint& z, double r_lo, double r_hi,
              double tol) {
  switch (t.kind) {
    case TargetKind::EuclideanBall:
      return compare_threshold(measure_dist(z, t.center, TorusNorm::Euclidean), r_lo, r_hi, tol);
    case TargetKind::SupBox: {
      const double f = t.comparable_to_ball ? std::sqrt(std::numbers::pi) : 1.0;
      return compare_threshold(measure_dist(z, t.center, TorusNorm::Sup), 0.5 * f * r_lo,
                               0.5 * f * r_hi, tol);
    }
    case TargetKind::Annulus: {
      const auto m = measure_dist(z, t.center, TorusNorm::Euclidean);
      const double rho = t.inner_radius;
      // Inside the inner disc (strictly) means outside the annulus.
      const Hit inner = compare_threshold(m, rho, rho, tol);
      if (inner == Hit::Yes) return Hit::No;
      const Hit outer = compare_threshold(m, std::sqrt(rho * rho + r_lo * r_lo),
                                          std::sqrt(rho * rho + r_hi * r_hi), tol);
      if (inner == Hit::Borderline) return outer == Hit::No ? Hit::No : Hit::Borderline;
      return outer;
    }
  }
  return Hit::No;
}

// psi(||g||) as an interval from the displacement interval, log||g|| = d / 2.
std::optional<Interval> psi_radius(const PsiSpec& psi, const BigInt& frobenius,
                                   const Interval& displacement) {
  if (psi.b != 0 && frobenius < 5) return std::nullopt;  // ||g|| < 2
  const double a = psi.log_value(0.5 * displacement.lo);
  const double b = psi.log_value(0.5 * displacement.hi);
  return Interval{std::exp(std::min(a, b)), std::exp(std::max(a, b))};
}

std::vector<std::uint64_t> cumulative(std::vector<std::uint64_t> v) {
  for (std::size_t i = 1; i < v.size(); ++i) v[i] += v[i - 1];
  return v;
}

}  // namespace

// --- fixed point -------------------------------------------------------------

double fixed_to_double(u128 x) noexcept {
  return static_cast<double>(static_cast<std::uint64_t>(x >> 64)) * 0x1p-64 +
         static_cast<double>(static_cast<std::uint64_t>(x)) * 0x1p-128;
}

u128 double_to_fixed(double x) noexcept {
  const double f = x - std::floor(x);
  return static_cast<u128>(std::ldexp(f, 128));
}

u128 bigint_mod_2_128(const BigInt& v) {
  BigInt m = v % two_128();
  if (m < 0) m += two_128();
  return to_u128(m);
}

// --- TorusPoint ---------------------------------------------------------------

TorusPoint::TorusPoint(Mode mode, std::vector<Rational> rational, std::vector<u128> fixed,
                       double error)
    : mode_(mode), rational_(std::move(rational)), fixed_(std::move(fixed)), error_(error) {}

TorusPoint TorusPoint::exact(std::vector<Rational> coords) {
  if (coords.empty()) throw std::invalid_argument("torus point needs coordinates");
  std::vector<u128> fixed;
  for (auto& c : coords) {
    c = frac(c);
    fixed.push_back(rational_to_fixed(c));
  }
  return TorusPoint(Mode::Exact, std::move(coords), std::move(fixed), 0.0);
}

TorusPoint TorusPoint::real(std::vector<u128> coords, double error) {
  if (coords.empty()) throw std::invalid_argument("torus point needs coordinates");
  return TorusPoint(Mode::Real, {}, std::move(coords), error);
}

TorusPoint TorusPoint::from_doubles(const std::vector<double>& coords) {
  std::vector<u128> fixed;
  double err = 0x1p-128;
  for (double c : coords) {
    fixed.push_back(double_to_fixed(c));
    err = std::max(err, std::abs(c) * 0x1p-53);
  }
  return real(std::move(fixed), err);
}

const std::vector<Rational>& TorusPoint::rational_coords() const {
  if (!is_exact()) throw std::logic_error("rational_coords() on a real-mode point");
  return rational_;
}

std::string TorusPoint::to_string() const {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < dim(); ++i) {
    if (i) os << ", ";
    if (is_exact()) {
      os << rational_[i];
    } else {
      os << coord(i);
    }
  }
  os << ')';
  return os.str();
}

// --- literals ---------------------------------------------------------------------

CoordinateLiteral parse_coordinate(const std::string& literal) {
  std::string s;
  for (char c : literal) {
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  }
  if (s.empty()) throw std::invalid_argument("empty coordinate literal");
  auto fail = [&](const std::string& why) {
    return std::invalid_argument("bad coordinate literal \"" + literal + "\": " + why);
  };

  std::size_t pos = 0;
  auto read_uint = [&]() -> BigInt {
    const std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start) throw fail("expected digits at offset " + std::to_string(start));
    return BigInt(s.substr(start, pos - start));
  };
  // number := digits [ '.' digits ] [ '/' digits ]
  auto read_number = [&]() -> Rational {
    Rational v(read_uint());
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      const std::size_t start = pos;
      const BigInt f = read_uint();
      v += Rational(f, boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(pos - start)));
    }
    if (pos < s.size() && s[pos] == '/' && pos + 1 < s.size() &&
        std::isdigit(static_cast<unsigned char>(s[pos + 1]))) {
      ++pos;
      const BigInt d = read_uint();
      if (d == 0) throw fail("zero denominator");
      v /= Rational(d);
    }
    return v;
  };

  bool parenthesized = false;
  if (s[pos] == '(') {
    parenthesized = true;
    ++pos;
  }
  Rational rational = 0;
  BigInt sqrt_coeff = 0;
  BigInt radicand = 0;
  bool first = true;
  while (pos < s.size() && s[pos] != ')') {
    int sign = 1;
    if (s[pos] == '+' || s[pos] == '-') {
      sign = s[pos] == '-' ? -1 : 1;
      ++pos;
    } else if (!first) {
      throw fail("expected + or - at offset " + std::to_string(pos));
    }
    first = false;
    if (s.compare(pos, 4, "sqrt") == 0) {
      pos += 4;
      const BigInt n = read_uint();
      if (radicand != 0 && n != radicand) throw fail("at most one distinct square root");
      radicand = n;
      sqrt_coeff += sign;
    } else {
      rational += sign * read_number();
    }
  }
  BigInt divisor = 1;
  if (parenthesized) {
    if (pos >= s.size() || s[pos] != ')') throw fail("missing ')'");
    ++pos;
    if (pos < s.size()) {
      if (s[pos] != '/') throw fail("expected '/' after ')'");
      ++pos;
      divisor = read_uint();
      if (divisor == 0) throw fail("zero denominator");
    }
  }
  if (pos != s.size()) throw fail("trailing characters at offset " + std::to_string(pos));

  CoordinateLiteral out;
  const BigInt root = sqrt_coeff == 0 ? BigInt(0) : boost::multiprecision::sqrt(radicand);
  if (sqrt_coeff == 0 || root * root == radicand) {
    out.exact = true;
    out.rational = frac((rational + Rational(sqrt_coeff * root)) / Rational(divisor));
    out.fixed = rational_to_fixed(out.rational);
    return out;
  }
  // floor(c sqrt(N) 2^128) = sign(c) isqrt(c^2 N 2^256), rounded toward -inf.
  const BigInt c2n = sqrt_coeff * sqrt_coeff * radicand;
  BigInt scaled_root = boost::multiprecision::sqrt(BigInt(c2n << 256));
  if (sqrt_coeff < 0) scaled_root = -scaled_root - 1;
  const BigInt rational_part = floor_div(numerator(rational) << 128, denominator(rational));
  BigInt total = floor_div(scaled_root + rational_part, divisor);
  total %= two_128();
  if (total < 0) total += two_128();
  out.exact = false;
  out.fixed = to_u128(total);
  out.error = 0x1p-125;
  return out;
}

TorusPoint parse_point(const std::vector<std::string>& literals) {
  std::vector<CoordinateLiteral> parsed;
  bool exact = true;
  for (const auto& l : literals) {
    parsed.push_back(parse_coordinate(l));
    exact = exact && parsed.back().exact;
  }
  if (exact) {
    std::vector<Rational> coords;
    for (auto& p : parsed) coords.push_back(p.rational);
    return TorusPoint::exact(std::move(coords));
  }
  std::vector<u128> fixed;
  double err = 0;
  for (auto& p : parsed) {
    fixed.push_back(p.fixed);
    err = std::max(err, p.exact ? 0x1p-128 : p.error);
  }
  return TorusPoint::real(std::move(fixed), err);
}

// --- action and distance ------------------------------------------------------------

TorusPoint act(const GroupElement& g, const TorusPoint& x) {
  const std::size_t d = g.dim();
  if (x.dim() != d) throw DimensionMismatch("act: matrix and point dimensions differ");
  if (x.is_exact()) {
    std::vector<Rational> y(d, Rational(0));
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) y[i] += Rational(g.at(i, j)) * x.rational_coords()[j];
    }
    return TorusPoint::exact(std::move(y));
  }
  std::vector<u128> y(d, 0);
  double worst_row = 0;
  for (std::size_t i = 0; i < d; ++i) {
    double row = 0;
    for (std::size_t j = 0; j < d; ++j) {
      y[i] += bigint_mod_2_128(g.at(i, j)) * x.fixed_coords()[j];
      row += abs(g.at(i, j)).convert_to<double>();
    }
    worst_row = std::max(worst_row, row);
  }
  return TorusPoint::real(std::move(y), x.error() * worst_row * (1 + 1e-12));
}

double torus_dist(const TorusPoint& x, const TorusPoint& y, TorusNorm norm) {
  return measure_dist(x, y, norm).dist;
}

// --- targets and psi -------------------------------------------------------------------

double TargetFamily::measure(double r) const {
  switch (kind) {
    case TargetKind::EuclideanBall:
    case TargetKind::Annulus:
      return std::numbers::pi * r * r;
    case TargetKind::SupBox: {
      const double side = comparable_to_ball ? std::sqrt(std::numbers::pi) * r : r;
      return side * side;
    }
  }
  return 0.0;
}

bool PsiSpec::defined_at(double log_norm) const {
  return b == 0 ? log_norm >= 0 : log_norm >= std::log(2.0);
}

double PsiSpec::log_value(double log_norm) const {
  double v = -a * log_norm;
  if (b != 0) v += b * std::log(log_norm);
  return v;
}

std::string to_string(PsiRegime r) {
  switch (r) {
    case PsiRegime::Finite:
      return "finite-regime";
    case PsiRegime::Infinite:
      return "infinite-regime";
    case PsiRegime::Gap:
      return "gap";
  }
  return "gap";
}

PsiRegime classify_psi(const PsiSpec& psi, double delta, double tol) {
  if (psi.a < 0) throw std::invalid_argument("psi exponent a must be >= 0");
  const bool equal = std::abs(psi.a - delta) <= tol;
  if (!equal) return psi.a > delta ? PsiRegime::Finite : PsiRegime::Infinite;
  if (psi.b < -0.5) return PsiRegime::Finite;
  if (psi.b > 2.5) return PsiRegime::Infinite;
  return PsiRegime::Gap;
}

// --- shrinking target ------------------------------------------------------------------

ShrinkResult solve_shrinking_target(const BallIndex& ball, const TorusPoint& x,
                                    const TargetFamily& target, const PsiSpec& psi,
                                    const ShrinkConfig& cfg) {
  if (ball.presentation().dim() != x.dim() || target.center.dim() != x.dim()) {
    throw DimensionMismatch("solve_shrinking_target: dimensions differ");
  }
  if (cfg.shell_width < 1) throw std::invalid_argument("shell width must be >= 1");
  const int R = ball.radius();
  const auto& elements = ball.elements();
  const auto chunks = detail::make_chunks(elements.size(), 2048);
  struct Partial {
    std::vector<std::uint64_t> hits;
    std::vector<Witness> witnesses;
    std::vector<Witness> borderline;
  };
  std::vector<Partial> parts(chunks.size());
  detail::for_each_chunk(chunks, cfg.threads, [&](const detail::Chunk& c) {
    Partial& part = parts[c.index];
    part.hits.assign(static_cast<std::size_t>(R) + 1, 0);
    for (std::size_t i = c.begin; i < c.end; ++i) {
      const auto& e = elements[i];
      const auto radius = psi_radius(psi, e.element.frobenius_sq(), e.displacement);
      if (!radius) continue;
      const TorusPoint z = act(e.element, x);
      const Hit h = in_target(target, z, radius->lo, radius->hi, cfg.borderline_tolerance);
      if (h == Hit::No) continue;
      Witness w{i, e.element, e.displacement,
                measure_dist(z, target.center,
                             target.kind == TargetKind::SupBox ? TorusNorm::Sup
                                                               : TorusNorm::Euclidean)
                    .dist,
                radius->mid()};
      if (h == Hit::Borderline) {
        part.borderline.push_back(std::move(w));
        continue;
      }
      ++part.hits[static_cast<std::size_t>(e.radius)];
      if (cfg.keep_witnesses) part.witnesses.push_back(std::move(w));
    }
  });
  ShrinkResult out;
  out.new_in_shell.assign(static_cast<std::size_t>(R) + 1, 0);
  for (auto& part : parts) {
    for (int n = 0; n <= R; ++n) out.new_in_shell[n] += part.hits[n];
    for (auto& w : part.witnesses) out.witnesses.push_back(std::move(w));
    for (auto& w : part.borderline) out.borderline.push_back(std::move(w));
  }
  out.counts = cumulative(out.new_in_shell);
  out.has_solution_in_shell.assign(static_cast<std::size_t>(R) + 1, false);
  for (int n = 1; n <= R; ++n) {
    const int lo = std::max(0, n - cfg.shell_width);
    out.has_solution_in_shell[n] = out.counts[n] > out.counts[lo];
  }
  return out;
}

ShrinkResult solve_shrinking_target(const GroupPresentation& p, const TorusPoint& x,
                                    const TargetFamily& target, const PsiSpec& psi,
                                    int max_radius, const ShrinkConfig& cfg) {
  EnumerationConfig ecfg;
  ecfg.threads = cfg.threads;
  return solve_shrinking_target(enumerate_ball(p, max_radius, ecfg), x, target, psi, cfg);
}

ExponentScan exponent_scan(const BallIndex& ball, const TorusPoint& x, const TorusPoint& y,
                           const std::vector<double>& alphas, const ShrinkConfig& cfg) {
  const int R = ball.radius();
  ExponentScan scan;
  scan.alphas = alphas;
  scan.counts.assign(alphas.size(), std::vector<std::uint64_t>(R + 1, 0));
  scan.borderline.assign(alphas.size(), std::vector<std::uint64_t>(R + 1, 0));
  for (const auto& e : ball.elements()) {
    const auto m = measure_dist(act(e.element, x), y, TorusNorm::Euclidean);
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      const auto r = psi_radius(PsiSpec{alphas[k], 0}, e.element.frobenius_sq(), e.displacement);
      const Hit h = compare_threshold(m, r->lo, r->hi, cfg.borderline_tolerance);
      if (h == Hit::Yes) ++scan.counts[k][e.radius];
      if (h == Hit::Borderline) ++scan.borderline[k][e.radius];
    }
  }
  for (auto& c : scan.counts) c = cumulative(c);
  for (auto& c : scan.borderline) c = cumulative(c);
  return scan;
}

FixedPointBall::FixedPointBall(const BallIndex& ball) : max_radius_(ball.radius()) {
  if (ball.presentation().dim() != 2) throw DimensionMismatch("FixedPointBall needs d = 2");
  for (const auto& e : ball.elements()) {
    const auto& g = e.element;
    mod_.push_back({bigint_mod_2_128(g.at(0, 0)), bigint_mod_2_128(g.at(0, 1)),
                    bigint_mod_2_128(g.at(1, 0)), bigint_mod_2_128(g.at(1, 1))});
    const double r0 = abs(g.at(0, 0)).convert_to<double>() + abs(g.at(0, 1)).convert_to<double>();
    const double r1 = abs(g.at(1, 0)).convert_to<double>() + abs(g.at(1, 1)).convert_to<double>();
    row_l1_.push_back(std::max(r0, r1) * (1 + 1e-12));
    log_norm_.push_back({0.5 * e.displacement.lo, 0.5 * e.displacement.hi});
    radius_.push_back(e.radius);
  }
}

ExponentScan FixedPointBall::scan(const TorusPoint& x, const TorusPoint& y,
                                  const std::vector<double>& alphas, double tol) const {
  if (x.dim() != 2 || y.dim() != 2) throw DimensionMismatch("FixedPointBall::scan needs d = 2");
  const int R = max_radius_;
  ExponentScan scan;
  scan.alphas = alphas;
  scan.counts.assign(alphas.size(), std::vector<std::uint64_t>(R + 1, 0));
  scan.borderline.assign(alphas.size(), std::vector<std::uint64_t>(R + 1, 0));
  const u128 x0 = x.fixed_coords()[0], x1 = x.fixed_coords()[1];
  const u128 y0 = y.fixed_coords()[0], y1 = y.fixed_coords()[1];
  for (std::size_t i = 0; i < mod_.size(); ++i) {
    const auto& m = mod_[i];
    const double c0 = circular(m[0] * x0 + m[1] * x1 - y0);
    const double c1 = circular(m[2] * x0 + m[3] * x1 - y1);
    const double dist = std::sqrt(c0 * c0 + c1 * c1);
    const Measured meas{dist, std::sqrt(2.0) * (x.error() * row_l1_[i] + y.error() + 0x1p-126) +
                                  4e-16 * dist};
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      const double lo = std::exp(-alphas[k] * log_norm_[i].hi);
      const double hi = std::exp(-alphas[k] * log_norm_[i].lo);
      const Hit h = compare_threshold(meas, lo, hi, tol);
      if (h == Hit::Yes) ++scan.counts[k][radius_[i]];
      if (h == Hit::Borderline) ++scan.borderline[k][radius_[i]];
    }
  }
  for (auto& c : scan.counts) c = cumulative(c);
  for (auto& c : scan.borderline) c = cumulative(c);
  return scan;
}

// --- ergodic character error ---------------------------------------------------------

Rational ergodic_character_error(const ShellMeasure& s, const std::vector<BigInt>& b) {
  if (b.size() != s.measure().dim()) throw DimensionMismatch("character and shell dimensions differ");
  if (std::all_of(b.begin(), b.end(), [](const BigInt& v) { return v == 0; })) {
    throw std::invalid_argument("ergodic_character_error needs b != 0");
  }
  const std::size_t d = b.size();
  std::map<std::vector<BigInt>, std::uint64_t> images;
  for (const auto& g : s.atoms()) {
    std::vector<BigInt> v(d, 0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) v[i] += g.at(j, i) * b[j];
    }
    ++images[v];
  }
  BigInt pairs = 0;
  for (const auto& [v, m] : images) pairs += BigInt(m) * m;
  const BigInt n = s.size();
  return Rational(pairs, n * n);
}

CharacterErrorSample ergodic_character_error_mc(const ShellMeasure& s,
                                               const std::vector<BigInt>& b,
                                               std::uint64_t samples, std::uint64_t seed) {
  if (b.size() != s.measure().dim()) throw DimensionMismatch("character and shell dimensions differ");
  if (samples < 2) throw std::invalid_argument("Monte Carlo estimate needs at least 2 samples");
  const std::size_t d = b.size();
  // Images g^T b labelled by equality class, so a pair test is one compare.
  std::map<std::vector<BigInt>, std::size_t> classes;
  std::vector<std::size_t> label;
  label.reserve(s.size());
  for (const auto& g : s.atoms()) {
    std::vector<BigInt> v(d, 0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) v[i] += g.at(j, i) * b[j];
    }
    label.push_back(classes.emplace(std::move(v), classes.size()).first->second);
  }
  CounterRng rng(seed);
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    const auto g = rng.below(s.size());
    const auto h = rng.below(s.size());
    if (label[g] == label[h]) ++hits;
  }
  CharacterErrorSample out;
  out.samples = samples;
  out.seed = seed;
  out.estimate = static_cast<double>(hits) / static_cast<double>(samples);
  out.std_error = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(samples - 1));
  return out;
}

}  // namespace shrink
