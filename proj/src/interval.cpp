#include "na/interval.hpp"

#include <numbers>

#include "na/errors.hpp"

namespace na {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

Interval clamp_unit(Interval x) {
  x.lo = std::max(x.lo, -1.0);
  x.hi = std::min(x.hi, 1.0);
  return x;
}

Interval clamp_nonneg(Interval x) {
  x.lo = std::max(x.lo, 0.0);
  return x;
}

// True when some point offset + period*k (k integer) lies in [lo, hi],
// counting points within a small tolerance of either end as inside.
bool hits_lattice(double lo, double hi, double offset) {
  const double tol = 1e-12 * (1.0 + std::max(std::fabs(lo), std::fabs(hi)));
  const double k = std::ceil((lo - tol - offset) / kTwoPi);
  return offset + kTwoPi * k <= hi + tol;
}

// Extreme values of |x| over the interval.
void abs_range(const Interval& x, double& m, double& M) {
  m = x.mig();
  M = x.mag();
}

}  // namespace

Interval operator/(const Interval& a, const Interval& b) {
  if (b.lo <= 0.0 && b.hi >= 0.0) {
    throw DomainError("interval division by an interval containing zero");
  }
  const double p1 = a.lo / b.lo, p2 = a.lo / b.hi, p3 = a.hi / b.lo, p4 = a.hi / b.hi;
  return widen({std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4})});
}

Interval pow_int(const Interval& x, int k) {
  if (k < 0) throw DomainError("negative integer exponent");
  if (k == 0) return Interval(1.0);
  if (k == 1) return x;
  if (k % 2 == 0) {
    double m, M;
    abs_range(x, m, M);
    return clamp_nonneg(widen({std::pow(m, k), std::pow(M, k)}));
  }
  return widen({std::pow(x.lo, k), std::pow(x.hi, k)});
}

double pow_rational(double x, int p, int q) {
  if (q == 1) return std::pow(x, p);
  const double mag = std::pow(std::fabs(x), static_cast<double>(p) / q);
  return (x < 0.0 && p % 2 != 0) ? -mag : mag;
}

Interval pow_rational(const Interval& x, int p, int q) {
  if (q % 2 == 0) throw DomainError("rational exponent needs an odd denominator");
  if (p < 0) throw DomainError("negative rational exponent");
  if (q == 1) return pow_int(x, p);
  if (p == 0) return Interval(1.0);
  if (p % 2 == 0) {
    double m, M;
    abs_range(x, m, M);
    return clamp_nonneg(widen({pow_rational(m, p, q), pow_rational(M, p, q)}));
  }
  // odd p, odd q: monotone increasing
  return widen({pow_rational(x.lo, p, q), pow_rational(x.hi, p, q)});
}

Interval sqrt(const Interval& x) {
  Interval a = x;
  if (a.lo < 0.0) {
    if (a.lo < -kSqrtClampTol) throw DomainError("sqrt of an interval with negative part");
    a.lo = 0.0;
    if (a.hi < 0.0) a.hi = 0.0;
  }
  return clamp_nonneg(widen({std::sqrt(a.lo), std::sqrt(a.hi)}));
}

Interval cbrt(const Interval& x) { return widen({std::cbrt(x.lo), std::cbrt(x.hi)}); }

Interval exp(const Interval& x) {
  return clamp_nonneg(widen({std::exp(x.lo), std::exp(x.hi)}));
}

Interval sin(const Interval& x) {
  if (!x.is_finite() || x.width() >= kTwoPi) return {-1.0, 1.0};
  const double s1 = std::sin(x.lo), s2 = std::sin(x.hi);
  Interval r = widen({std::min(s1, s2), std::max(s1, s2)});
  if (hits_lattice(x.lo, x.hi, 0.5 * kPi)) r.hi = 1.0;
  if (hits_lattice(x.lo, x.hi, -0.5 * kPi)) r.lo = -1.0;
  return clamp_unit(r);
}

Interval cos(const Interval& x) {
  if (!x.is_finite() || x.width() >= kTwoPi) return {-1.0, 1.0};
  const double c1 = std::cos(x.lo), c2 = std::cos(x.hi);
  Interval r = widen({std::min(c1, c2), std::max(c1, c2)});
  if (hits_lattice(x.lo, x.hi, 0.0)) r.hi = 1.0;
  if (hits_lattice(x.lo, x.hi, kPi)) r.lo = -1.0;
  return clamp_unit(r);
}

}  // namespace na
