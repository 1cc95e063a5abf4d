#pragma once

// Entire functions as evaluatable specifications: plain complex evaluation,
// overflow-safe log-polar evaluation, logarithmic derivatives, zeros and the
// closed-form moduli used as test oracles.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynlab/errors.hpp"

namespace dynlab {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kE = 2.718281828459045;
// log(DBL_MAX); moduli above exp(kLogDoubleMax) only exist in log form.
inline constexpr double kLogDoubleMax = 709.782712893384;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  if (!std::isfinite(a)) return a;
  if (a > -kPi && a <= kPi) return a;
  double r = std::fmod(a + kPi, kTwoPi);
  if (r <= 0.0) r += kTwoPi;
  return r - kPi;
}

/// A complex number stored as (log|w|, arg w). Zero is a flag, never -inf.
struct ComplexSample {
  double log_mag = 0.0;
  double arg = 0.0;
  bool zero = false;

  static ComplexSample from(cplx w) {
    ComplexSample s;
    if (w == cplx(0.0, 0.0)) {
      s.zero = true;
      return s;
    }
    s.log_mag = std::log(std::abs(w));
    s.arg = wrap_angle(std::arg(w));
    return s;
  }

  static ComplexSample polar(double log_mag, double arg) {
    return ComplexSample{log_mag, wrap_angle(arg), false};
  }

  /// log|w|, with -inf for the zero sample.
  double log_abs() const { return zero ? -std::numeric_limits<double>::infinity() : log_mag; }

  /// Back to a plain complex number; throws Overflow when |w| is out of range.
  cplx to_complex() const {
    if (zero) return {0.0, 0.0};
    if (log_mag > kLogDoubleMax) throw Error(ErrorKind::Overflow, "sample modulus exceeds double range");
    return std::polar(std::exp(log_mag), arg);
  }
};

enum class FunctionKind { ScaledExp, Sin, Cos, Polynomial, TaylorSeries };

/// f(z) = scale * base(z + shift), with base one of the builtin families.
/// Immutable value type; every evaluator below is a pure function of it.
struct FunctionSpec {
  FunctionKind kind = FunctionKind::ScaledExp;
  cplx lambda{1.0, 0.0};             // ScaledExp multiplier
  std::vector<cplx> coefficients;    // ascending powers (Polynomial, TaylorSeries)
  double validity_radius = 0.0;      // TaylorSeries only
  cplx scale{1.0, 0.0};
  cplx shift{0.0, 0.0};

  static FunctionSpec scaled_exp(cplx lambda) {
    FunctionSpec f;
    f.kind = FunctionKind::ScaledExp;
    f.lambda = lambda;
    return f;
  }
  static FunctionSpec sine() {
    FunctionSpec f;
    f.kind = FunctionKind::Sin;
    return f;
  }
  static FunctionSpec cosine() {
    FunctionSpec f;
    f.kind = FunctionKind::Cos;
    return f;
  }
  static FunctionSpec polynomial(std::vector<cplx> coeffs) {
    FunctionSpec f;
    f.kind = FunctionKind::Polynomial;
    f.coefficients = std::move(coeffs);
    f.trim();
    require(!f.coefficients.empty(), ErrorKind::InvalidArgument, "polynomial has no nonzero coefficient");
    return f;
  }
  static FunctionSpec taylor_series(std::vector<cplx> coeffs, double validity_radius) {
    FunctionSpec f;
    f.kind = FunctionKind::TaylorSeries;
    f.coefficients = std::move(coeffs);
    f.validity_radius = validity_radius;
    f.trim();
    require(!f.coefficients.empty(), ErrorKind::InvalidArgument, "series has no nonzero coefficient");
    require(validity_radius > 0.0, ErrorKind::InvalidArgument, "validity_radius must be positive");
    return f;
  }

  FunctionSpec with_shift(cplx s) const {
    FunctionSpec f = *this;
    f.shift = s;
    return f;
  }
  FunctionSpec scaled_by(cplx c) const {
    FunctionSpec f = *this;
    f.scale *= c;
    return f;
  }

  int degree() const { return static_cast<int>(coefficients.size()) - 1; }

  /// Total constant multiplier (lambda folded in for ScaledExp).
  cplx multiplier() const { return kind == FunctionKind::ScaledExp ? scale * lambda : scale; }

  bool is_transcendental() const { return kind != FunctionKind::Polynomial; }

  std::string name() const {
    switch (kind) {
      case FunctionKind::ScaledExp: return "scaled_exp";
      case FunctionKind::Sin: return "sin";
      case FunctionKind::Cos: return "cos";
      case FunctionKind::Polynomial: return "polynomial";
      case FunctionKind::TaylorSeries: return "taylor_series";
    }
    return "unknown";
  }

 private:
  void trim() {
    while (!coefficients.empty() && coefficients.back() == cplx(0.0, 0.0)) coefficients.pop_back();
  }
};

namespace detail {

struct HornerResult {
  cplx value;
  cplx derivative;
  double last_term = 0.0;  // |c_n| |w|^n of the highest retained term
  double abs_sum = 0.0;    // sum of |c_k| |w|^k
};

inline HornerResult horner(const std::vector<cplx>& c, cplx w) {
  HornerResult h{};
  cplx p(0.0, 0.0), dp(0.0, 0.0);
  for (std::size_t k = c.size(); k-- > 0;) {
    dp = dp * w + p;
    p = p * w + c[k];
  }
  h.value = p;
  h.derivative = dp;
  double aw = std::abs(w);
  double pw = 1.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    double t = std::abs(c[k]) * pw;
    h.abs_sum += t;
    if (k + 1 == c.size()) h.last_term = t;
    pw *= aw;
  }
  return h;
}

// Truncation guard: the highest retained term must be negligible against the
// partial sum. The floor (1e-6 of the absolute sum) keeps evaluation defined
// next to zeros of the series, where |partial sum| itself is tiny.
inline constexpr double kTaylorTailTolerance = 1e-14;

inline void check_taylor(const FunctionSpec& f, cplx w, const HornerResult& h) {
  if (std::abs(w) > f.validity_radius * (1.0 + 1e-12))
    throw Error(ErrorKind::OutOfValidity, "|z| beyond TaylorSeries validity radius");
  double scale = std::max(std::abs(h.value), 1e-6 * h.abs_sum);
  if (h.last_term > kTaylorTailTolerance * scale)
    throw Error(ErrorKind::OutOfValidity, "TaylorSeries tail term not below tolerance");
}

inline std::vector<cplx> derivative_coefficients(const std::vector<cplx>& c) {
  std::vector<cplx> d;
  for (std::size_t k = 1; k < c.size(); ++k) d.push_back(c[k] * static_cast<double>(k));
  return d;
}

inline cplx finite_or_overflow(cplx v, const char* what) {
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw Error(ErrorKind::Overflow, what);
  return v;
}

}  // namespace detail

/// f(z). Throws Overflow when the value leaves double range (use evaluate_log).
inline cplx evaluate(const FunctionSpec& f, cplx z) {
  cplx w = z + f.shift;
  cplx v;
  switch (f.kind) {
    case FunctionKind::ScaledExp: v = f.lambda * std::exp(w); break;
    case FunctionKind::Sin: v = std::sin(w); break;
    case FunctionKind::Cos: v = std::cos(w); break;
    case FunctionKind::Polynomial: v = detail::horner(f.coefficients, w).value; break;
    case FunctionKind::TaylorSeries: {
      auto h = detail::horner(f.coefficients, w);
      detail::check_taylor(f, w, h);
      v = h.value;
      break;
    }
  }
  return detail::finite_or_overflow(f.scale * v, "|f(z)| exceeds double range");
}

/// f'(z) in plain arithmetic.
inline cplx evaluate_derivative(const FunctionSpec& f, cplx z) {
  cplx w = z + f.shift;
  cplx v;
  switch (f.kind) {
    case FunctionKind::ScaledExp: v = f.lambda * std::exp(w); break;
    case FunctionKind::Sin: v = std::cos(w); break;
    case FunctionKind::Cos: v = -std::sin(w); break;
    case FunctionKind::Polynomial: v = detail::horner(f.coefficients, w).derivative; break;
    case FunctionKind::TaylorSeries: {
      auto h = detail::horner(f.coefficients, w);
      detail::check_taylor(f, w, h);
      v = h.derivative;
      break;
    }
  }
  return detail::finite_or_overflow(f.scale * v, "|f'(z)| exceeds double range");
}

namespace detail {

// (log|z|, arg z) -> (log|z + s|, arg(z + s)) without forming z when |z| is huge.
inline ComplexSample shift_polar(double log_mag, double arg, cplx s) {
  if (s == cplx(0.0, 0.0)) return ComplexSample::polar(log_mag, arg);
  if (log_mag < 600.0) return ComplexSample::from(std::polar(std::exp(log_mag), arg) + s);
  cplx u = s * std::polar(std::exp(-log_mag), -arg);  // s / z
  cplx l = std::log(1.0 + u);
  return ComplexSample::polar(log_mag + l.real(), arg + l.imag());
}

inline ComplexSample add_log(ComplexSample s, cplx log_factor) {
  if (s.zero) return s;
  return ComplexSample::polar(s.log_mag + log_factor.real(), s.arg + log_factor.imag());
}

// Leading-term factorization p(w) = w^d q(1/w) for |w| > 1.
struct ReversedPoly {
  int d = 0;
  cplx q, dq;  // q(u), q'(u) with q(u) = sum a_k u^(d-k)
};

inline ReversedPoly reversed(const std::vector<cplx>& c, cplx u) {
  ReversedPoly r;
  r.d = static_cast<int>(c.size()) - 1;
  cplx q(0.0, 0.0), dq(0.0, 0.0);
  for (std::size_t k = 0; k < c.size(); ++k) {  // coefficient of u^(d-k) is c[k]
    dq = dq * u + q;
    q = q * u + c[k];
  }
  r.q = q;
  r.dq = dq;
  return r;
}

// log of sin/cos at |Im w| large: the dominant exponential is factored out.
inline cplx log_trig(bool is_sin, cplx w) {
  const cplx i(0.0, 1.0);
  const double ln2 = std::log(2.0);
  if (w.imag() >= 0.0) {
    cplx e = std::exp(2.0 * i * w);  // |e| = exp(-2 Im w)
    cplx tail = is_sin ? std::log(1.0 - e) : std::log(1.0 + e);
    cplx base = -i * w - ln2;
    if (is_sin) base += cplx(0.0, kPi / 2.0);
    return base + tail;
  }
  cplx e = std::exp(-2.0 * i * w);
  cplx tail = is_sin ? std::log(1.0 - e) : std::log(1.0 + e);
  cplx base = i * w - ln2;
  if (is_sin) base += cplx(0.0, -kPi / 2.0);
  return base + tail;
}

}  // namespace detail

/// log|f(z)| and arg f(z) for z = exp(z_logmag) * exp(i z_arg), valid far
/// beyond double range for ScaledExp and Polynomial. Sin/Cos accept any z that
/// is itself representable; TaylorSeries only inside its validity radius.
inline ComplexSample evaluate_log(const FunctionSpec& f, double z_logmag, double z_arg) {
  ComplexSample w = detail::shift_polar(z_logmag, z_arg, f.shift);
  cplx log_mult = std::log(f.multiplier());
  switch (f.kind) {
    case FunctionKind::ScaledExp: {
      if (w.zero) return detail::add_log(ComplexSample::polar(0.0, 0.0), log_mult);
      double c = std::cos(w.arg), s = std::sin(w.arg);
      double x, y;
      if (w.log_mag <= kLogDoubleMax) {
        double m = std::exp(w.log_mag);
        x = m * c;
        y = m * s;
      } else {
        x = (c == 0.0) ? 0.0 : std::copysign(std::exp(w.log_mag + std::log(std::abs(c))), c);
        y = (s == 0.0) ? 0.0 : std::copysign(std::exp(w.log_mag + std::log(std::abs(s))), s);
      }
      if (!std::isfinite(x) || !std::isfinite(y))
        throw Error(ErrorKind::Overflow, "log|exp(z)| exceeds double range");
      return ComplexSample::polar(x + log_mult.real(), y + log_mult.imag());
    }
    case FunctionKind::Polynomial: {
      if (w.zero) return detail::add_log(ComplexSample::from(f.coefficients[0]), log_mult);
      if (w.log_mag <= 0.0) {
        return detail::add_log(ComplexSample::from(detail::horner(f.coefficients, w.to_complex()).value), log_mult);
      }
      cplx u = std::polar(std::exp(-w.log_mag), -w.arg);
      auto r = detail::reversed(f.coefficients, u);
      if (r.q == cplx(0.0, 0.0)) return ComplexSample{0.0, 0.0, true};
      cplx lq = std::log(r.q);
      return ComplexSample::polar(r.d * w.log_mag + lq.real() + log_mult.real(),
                                  r.d * w.arg + lq.imag() + log_mult.imag());
    }
    case FunctionKind::Sin:
    case FunctionKind::Cos: {
      if (w.log_mag > 700.0)
        throw Error(ErrorKind::Unsupported, "sin/cos log evaluation needs a representable argument");
      cplx wz = w.to_complex();
      bool is_sin = f.kind == FunctionKind::Sin;
      if (std::abs(wz.imag()) < 20.0) {
        cplx v = is_sin ? std::sin(wz) : std::cos(wz);
        return detail::add_log(ComplexSample::from(v), log_mult);
      }
      cplx l = detail::log_trig(is_sin, wz);
      return ComplexSample::polar(l.real() + log_mult.real(), l.imag() + log_mult.imag());
    }
    case FunctionKind::TaylorSeries: {
      if (w.log_mag > kLogDoubleMax || std::exp(w.log_mag) > f.validity_radius * (1.0 + 1e-12))
        throw Error(ErrorKind::OutOfValidity, "|z| beyond TaylorSeries validity radius");
      cplx wz = w.zero ? cplx(0.0, 0.0) : w.to_complex();
      auto h = detail::horner(f.coefficients, wz);
      detail::check_taylor(f, wz, h);
      return detail::add_log(ComplexSample::from(h.value), log_mult);
    }
  }
  throw Error(ErrorKind::Unsupported, "unknown function kind");
}

inline ComplexSample evaluate_log(const FunctionSpec& f, cplx z) {
  ComplexSample s = ComplexSample::from(z);
  if (s.zero) {
    cplx v = evaluate(f, z);
    return ComplexSample::from(v);
  }
  return evaluate_log(f, s.log_mag, s.arg);
}

/// f'(z)/f(z) from the closed form of each family.
inline cplx log_derivative(const FunctionSpec& f, cplx z) {
  cplx w = z + f.shift;
  auto scale_of = [&](cplx x) { return std::max(1.0, std::abs(x)); };
  switch (f.kind) {
    case FunctionKind::ScaledExp: return {1.0, 0.0};
    case FunctionKind::Sin: {
      double k = std::round(w.real() / kPi);
      if (std::abs(w - cplx(k * kPi, 0.0)) < 1e-14 * scale_of(w))
        throw Error(ErrorKind::NearZeroDivision, "z is a zero of sin");
      return 1.0 / std::tan(w);
    }
    case FunctionKind::Cos: {
      double k = std::round((w.real() - kPi / 2.0) / kPi);
      if (std::abs(w - cplx(kPi / 2.0 + k * kPi, 0.0)) < 1e-14 * scale_of(w))
        throw Error(ErrorKind::NearZeroDivision, "z is a zero of cos");
      return -std::tan(w);
    }
    case FunctionKind::Polynomial:
    case FunctionKind::TaylorSeries: {
      if (f.kind == FunctionKind::Polynomial && std::abs(w) > 1.0) {
        cplx u = 1.0 / w;
        auto r = detail::reversed(f.coefficients, u);
        if (std::abs(r.q) == 0.0) throw Error(ErrorKind::NearZeroDivision, "z is a zero of the polynomial");
        // distance to the nearest zero is about |w| |q| / |d q - u q'|
        cplx num = static_cast<double>(r.d) * r.q - u * r.dq;
        if (std::abs(r.q) < 1e-14 * std::abs(num))
          throw Error(ErrorKind::NearZeroDivision, "z is within tolerance of a zero");
        return num / (r.q * w);
      }
      auto h = detail::horner(f.coefficients, w);
      if (f.kind == FunctionKind::TaylorSeries) detail::check_taylor(f, w, h);
      if (h.value == cplx(0.0, 0.0) || std::abs(h.value) < 1e-14 * scale_of(w) * std::abs(h.derivative))
        throw Error(ErrorKind::NearZeroDivision, "z is within tolerance of a zero");
      return h.derivative / h.value;
    }
  }
  throw Error(ErrorKind::Unsupported, "unknown function kind");
}

/// log|f'(z)/f(z)| for z given in log-polar form, beyond double range where
/// the family allows it (ScaledExp, Polynomial).
inline double log_abs_log_derivative(const FunctionSpec& f, double z_logmag, double z_arg) {
  if (f.kind == FunctionKind::ScaledExp) return 0.0;
  if (z_logmag < 600.0) return std::log(std::abs(log_derivative(f, std::polar(std::exp(z_logmag), z_arg))));
  if (f.kind != FunctionKind::Polynomial)
    throw Error(ErrorKind::Unsupported, "log-derivative beyond double range needs ScaledExp or Polynomial");
  ComplexSample w = detail::shift_polar(z_logmag, z_arg, f.shift);
  cplx u = std::polar(std::exp(-w.log_mag), -w.arg);
  auto r = detail::reversed(f.coefficients, u);
  cplx num = static_cast<double>(r.d) - u * r.dq / r.q;
  return std::log(std::abs(num)) - w.log_mag;
}

/// Second derivative of log f, by a central difference of log_derivative.
inline cplx log_derivative2(const FunctionSpec& f, cplx z) {
  double h = 1e-5 * std::max(1.0, std::abs(z));
  return (log_derivative(f, z + h) - log_derivative(f, z - h)) / (2.0 * h);
}

namespace detail {

// Simultaneous root refinement (Aberth-Ehrlich) followed by Newton polishing.
inline std::vector<cplx> polynomial_roots(const std::vector<cplx>& coeffs) {
  std::vector<cplx> c = coeffs;
  while (!c.empty() && c.back() == cplx(0.0, 0.0)) c.pop_back();
  std::vector<cplx> roots;
  std::size_t lead_zeros = 0;
  while (lead_zeros + 1 < c.size() && c[lead_zeros] == cplx(0.0, 0.0)) ++lead_zeros;
  for (std::size_t k = 0; k < lead_zeros; ++k) roots.emplace_back(0.0, 0.0);
  std::vector<cplx> p(c.begin() + static_cast<std::ptrdiff_t>(lead_zeros), c.end());
  int d = static_cast<int>(p.size()) - 1;
  if (d <= 0) return roots;
  // Cauchy bound for the initial circle.
  double bound = 0.0;
  for (int k = 0; k < d; ++k) bound = std::max(bound, std::abs(p[k] / p[d]));
  bound = 1.0 + bound;
  double rad = 0.5 * bound;
  std::vector<cplx> z(d);
  for (int k = 0; k < d; ++k) z[k] = std::polar(rad, kTwoPi * (k + 0.25) / d + 0.4);
  for (int iter = 0; iter < 500; ++iter) {
    double max_step = 0.0;
    for (int k = 0; k < d; ++k) {
      auto h = horner(p, z[k]);
      if (h.value == cplx(0.0, 0.0)) continue;
      cplx ratio = h.value / h.derivative;
      cplx sum(0.0, 0.0);
      for (int j = 0; j < d; ++j)
        if (j != k) sum += 1.0 / (z[k] - z[j]);
      cplx step = ratio / (1.0 - ratio * sum);
      if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) continue;
      z[k] -= step;
      max_step = std::max(max_step, std::abs(step) / std::max(1.0, std::abs(z[k])));
    }
    if (max_step < 1e-15) break;
  }
  for (auto& r : z) {
    for (int it = 0; it < 3; ++it) {
      auto h = horner(p, r);
      if (h.derivative == cplx(0.0, 0.0)) break;
      cplx step = h.value / h.derivative;
      if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
      r -= step;
    }
    roots.push_back(r);
  }
  return roots;
}

inline void sort_by_modulus(std::vector<cplx>& z) {
  std::sort(z.begin(), z.end(), [](cplx a, cplx b) {
    double ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma < mb;
    if (std::arg(a) != std::arg(b)) return std::arg(a) < std::arg(b);
    return false;
  });
}

}  // namespace detail

/// True when every zero has a generator (closed form or root finding).
inline bool has_zero_generator(const FunctionSpec&) { return true; }

/// All zeros with |z| <= r, with multiplicity, sorted by modulus.
inline constexpr double kMaxEnumeratedZeros = 1e7;

inline std::vector<cplx> known_zeros(const FunctionSpec& f, double r, bool allow_root_finding = true) {
  require(r > 0.0, ErrorKind::InvalidArgument, "known_zeros needs r > 0");
  require(f.multiplier() != cplx(0.0, 0.0), ErrorKind::InvalidArgument, "identically zero function");
  std::vector<cplx> out;
  const double tol = 1e-12 * std::max(1.0, r);
  auto keep = [&](cplx z) {
    if (std::abs(z) <= r + tol) out.push_back(z);
  };
  switch (f.kind) {
    case FunctionKind::ScaledExp: break;
    case FunctionKind::Sin:
    case FunctionKind::Cos: {
      double offset = f.kind == FunctionKind::Sin ? 0.0 : kPi / 2.0;
      // zeros of base at w = offset + k pi, so z = w - shift
      double lo = std::floor((f.shift.real() - r - offset) / kPi) - 1.0;
      double hi = std::ceil((f.shift.real() + r - offset) / kPi) + 1.0;
      if (hi - lo > kMaxEnumeratedZeros)
        throw Error(ErrorKind::Unsupported, "more than " + std::to_string(static_cast<long long>(kMaxEnumeratedZeros)) +
                                                " zeros in the disk");
      for (double k = lo; k <= hi; k += 1.0) keep(cplx(offset + k * kPi, 0.0) - f.shift);
      break;
    }
    case FunctionKind::Polynomial:
      for (cplx w : detail::polynomial_roots(f.coefficients)) keep(w - f.shift);
      break;
    case FunctionKind::TaylorSeries: {
      if (!allow_root_finding) throw Error(ErrorKind::Unsupported, "no zero generator for TaylorSeries");
      for (cplx w : detail::polynomial_roots(f.coefficients)) {
        if (std::abs(w) > f.validity_radius) continue;
        // a root of the truncation is only trusted where the series is valid
        try {
          auto h = detail::horner(f.coefficients, w);
          detail::check_taylor(f, w, h);
        } catch (const Error&) {
          continue;
        }
        keep(w - f.shift);
      }
      break;
    }
  }
  detail::sort_by_modulus(out);
  return out;
}

/// The same function rescaled so that f(0) = 1.
inline FunctionSpec normalized(const FunctionSpec& f) {
  cplx f0 = evaluate(f, 0.0);
  if (std::abs(f0) < 1e-300) throw Error(ErrorKind::NormalizationError, "f(0) = 0 cannot be rescaled to 1");
  return f.scaled_by(1.0 / f0);
}

inline bool is_normalized(const FunctionSpec& f) { return std::abs(evaluate(f, 0.0) - 1.0) < 1e-12; }

// ---------------------------------------------------------------------------
// Closed forms (unshifted families only). Used as oracles and for radii whose
// modulus is beyond double range.

namespace detail {
inline bool monomial(const FunctionSpec& f, int& degree, cplx& coeff) {
  if (f.kind != FunctionKind::Polynomial) return false;
  int nz = 0;
  for (std::size_t k = 0; k < f.coefficients.size(); ++k)
    if (f.coefficients[k] != cplx(0.0, 0.0)) {
      ++nz;
      degree = static_cast<int>(k);
      coeff = f.coefficients[k];
    }
  return nz == 1;
}
inline double log_sinh(double r) { return r + std::log1p(-std::exp(-2.0 * r)) - std::log(2.0); }
inline double log_cosh(double r) { return r + std::log1p(std::exp(-2.0 * r)) - std::log(2.0); }
}  // namespace detail

inline std::optional<double> closed_form_log_max_modulus(const FunctionSpec& f, double r) {
  if (f.shift != cplx(0.0, 0.0)) return std::nullopt;
  double c = std::log(std::abs(f.multiplier()));
  int d = 0;
  cplx a;
  switch (f.kind) {
    case FunctionKind::ScaledExp: return c + r;
    case FunctionKind::Sin: return c + detail::log_sinh(r);
    case FunctionKind::Cos: return c + detail::log_cosh(r);
    case FunctionKind::Polynomial:
      if (detail::monomial(f, d, a)) return c + std::log(std::abs(a)) + d * std::log(r);
      return std::nullopt;
    case FunctionKind::TaylorSeries: return std::nullopt;
  }
  return std::nullopt;
}

inline std::optional<double> closed_form_log_min_modulus(const FunctionSpec& f, double r) {
  if (f.shift != cplx(0.0, 0.0)) return std::nullopt;
  double c = std::log(std::abs(f.multiplier()));
  int d = 0;
  cplx a;
  if (f.kind == FunctionKind::ScaledExp) return c - r;
  if (detail::monomial(f, d, a)) return c + std::log(std::abs(a)) + d * std::log(r);
  return std::nullopt;
}

namespace detail {
// (1/2pi) int max(0, c + r cos t) dt
inline double exp_characteristic(double c, double r) {
  if (c >= r) return c;
  if (c <= -r) return 0.0;
  double t0 = std::acos(-c / r);
  return (c * t0 + r * std::sin(t0)) / kPi;
}
}  // namespace detail

inline std::optional<double> closed_form_characteristic(const FunctionSpec& f, double r) {
  if (f.shift != cplx(0.0, 0.0)) return std::nullopt;
  double c = std::log(std::abs(f.multiplier()));
  int d = 0;
  cplx a;
  if (f.kind == FunctionKind::ScaledExp) return detail::exp_characteristic(c, r);
  if (detail::monomial(f, d, a)) return std::max(0.0, c + std::log(std::abs(a)) + d * std::log(r));
  return std::nullopt;
}

/// log T(r) from log r; works when r itself overflows (ScaledExp).
inline std::optional<double> closed_form_log_characteristic(const FunctionSpec& f, double log_r) {
  if (log_r < 700.0) {
    auto t = closed_form_characteristic(f, std::exp(log_r));
    if (!t || *t <= 0.0) return std::nullopt;
    return std::log(*t);
  }
  if (f.kind != FunctionKind::ScaledExp || f.shift != cplx(0.0, 0.0)) return std::nullopt;
  double ratio = std::log(std::abs(f.multiplier())) * std::exp(-log_r);  // c / r
  double t0 = std::acos(std::clamp(-ratio, -1.0, 1.0));
  return log_r - std::log(kPi) + std::log(std::sin(t0) + ratio * t0);
}

/// log(log M(r)) from log r for ScaledExp, valid when log M itself overflows.
inline std::optional<double> closed_form_loglog_max_modulus(const FunctionSpec& f, double log_r) {
  if (f.kind != FunctionKind::ScaledExp || f.shift != cplx(0.0, 0.0)) return std::nullopt;
  double c = std::log(std::abs(f.multiplier()));
  return log_r + std::log1p(c * std::exp(-log_r));
}

/// log|f(z)| / r at z = r (1 + eps) exp(i theta), with r = exp(log_r) possibly
/// beyond double range. ScaledExp only once r leaves double range.
inline double log_modulus_over_radius(const FunctionSpec& f, double log_r, double eps, double theta) {
  if (log_r < 600.0) {
    double r = std::exp(log_r);
    return evaluate_log(f, log_r + std::log1p(eps), theta).log_abs() / r;
  }
  if (f.kind != FunctionKind::ScaledExp)
    throw Error(ErrorKind::Unsupported, "scaled modulus beyond double range needs ScaledExp");
  double inv_r = std::exp(-log_r);
  double c = std::log(std::abs(f.multiplier()));
  return (1.0 + eps) * std::cos(theta) + (f.shift.real() + c) * inv_r;
}

// ---------------------------------------------------------------------------
// JSON: {"kind": "...", "params": {...}}; complex values are [re, im] or a number.

namespace detail {
inline nlohmann::json complex_to_json(cplx c) { return nlohmann::json::array({c.real(), c.imag()}); }
inline cplx complex_from_json(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
  throw Error(ErrorKind::ConfigError, "complex value must be a number or [re, im]");
}
}  // namespace detail

inline nlohmann::json to_json(const FunctionSpec& f) {
  nlohmann::json params = nlohmann::json::object();
  if (f.kind == FunctionKind::ScaledExp) params["lambda"] = detail::complex_to_json(f.lambda);
  if (f.kind == FunctionKind::Polynomial || f.kind == FunctionKind::TaylorSeries) {
    auto arr = nlohmann::json::array();
    for (cplx c : f.coefficients) arr.push_back(detail::complex_to_json(c));
    params["coefficients"] = arr;
  }
  if (f.kind == FunctionKind::TaylorSeries) params["validity_radius"] = f.validity_radius;
  if (f.scale != cplx(1.0, 0.0)) params["scale"] = detail::complex_to_json(f.scale);
  if (f.shift != cplx(0.0, 0.0)) params["shift"] = detail::complex_to_json(f.shift);
  return {{"kind", f.name()}, {"params", params}};
}

inline FunctionSpec function_from_json(const nlohmann::json& j) {
  try {
    std::string kind = j.at("kind").get<std::string>();
    const nlohmann::json params = j.contains("params") ? j.at("params") : nlohmann::json::object();
    auto coeffs = [&] {
      std::vector<cplx> c;
      for (const auto& v : params.at("coefficients")) c.push_back(detail::complex_from_json(v));
      return c;
    };
    FunctionSpec f;
    if (kind == "scaled_exp" || kind == "exp") {
      f = FunctionSpec::scaled_exp(params.contains("lambda") ? detail::complex_from_json(params["lambda"]) : cplx(1.0));
    } else if (kind == "sin") {
      f = FunctionSpec::sine();
    } else if (kind == "cos") {
      f = FunctionSpec::cosine();
    } else if (kind == "polynomial") {
      f = FunctionSpec::polynomial(coeffs());
    } else if (kind == "taylor_series") {
      f = FunctionSpec::taylor_series(coeffs(), params.at("validity_radius").get<double>());
    } else {
      throw Error(ErrorKind::ConfigError, "unknown function kind '" + kind + "'");
    }
    if (params.contains("scale")) f.scale = detail::complex_from_json(params["scale"]);
    if (params.contains("shift")) f.shift = detail::complex_from_json(params["shift"]);
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("function spec: ") + e.what());
  }
}

}  // namespace dynlab
