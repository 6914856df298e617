#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace na {

// Every primitive interval result is widened by this much instead of
// switching the FPU rounding mode.
inline constexpr double kRelSlack = 1e-14;
inline constexpr double kAbsSlack = 1e-300;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  constexpr Interval() = default;
  constexpr Interval(double v) : lo(v), hi(v) {}  // NOLINT: implicit point
  constexpr Interval(double l, double h) : lo(l), hi(h) {}

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  double rad() const { return 0.5 * (hi - lo); }
  // Largest absolute value in the interval.
  double mag() const { return std::max(std::fabs(lo), std::fabs(hi)); }
  // Smallest absolute value in the interval.
  double mig() const {
    if (lo <= 0.0 && hi >= 0.0) return 0.0;
    return std::min(std::fabs(lo), std::fabs(hi));
  }
  bool contains(double v) const { return lo <= v && v <= hi; }
  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
  bool straddles_zero() const { return lo <= 0.0 && hi >= 0.0; }
  bool is_finite() const { return std::isfinite(lo) && std::isfinite(hi); }

  friend bool operator==(const Interval&, const Interval&) = default;
};

using IntervalVector = std::vector<Interval>;

// Outward widening applied after every primitive operation.
inline Interval widen(Interval x) {
  x.lo -= std::max(std::fabs(x.lo) * kRelSlack, kAbsSlack);
  x.hi += std::max(std::fabs(x.hi) * kRelSlack, kAbsSlack);
  return x;
}

inline Interval hull(const Interval& a, const Interval& b) {
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

// Empty intersections collapse to a NaN interval; callers check with is_empty.
inline Interval intersect(const Interval& a, const Interval& b) {
  return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

inline bool is_empty(const Interval& a) { return !(a.lo <= a.hi); }

inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }

inline Interval operator+(const Interval& a, const Interval& b) {
  return widen({a.lo + b.lo, a.hi + b.hi});
}

inline Interval operator-(const Interval& a, const Interval& b) {
  return widen({a.lo - b.hi, a.hi - b.lo});
}

inline Interval operator*(const Interval& a, const Interval& b) {
  if (a.lo == a.hi && b.lo == b.hi) return widen(Interval(a.lo * b.lo));
  const double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
  return widen({std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4})});
}

// Scalar multiple; exact sign handling, no dependency issues.
inline Interval scale(double s, const Interval& a) {
  return s >= 0.0 ? widen({s * a.lo, s * a.hi}) : widen({s * a.hi, s * a.lo});
}

Interval operator/(const Interval& a, const Interval& b);

// x^k for integer k >= 0 with the even-power tightening.
Interval pow_int(const Interval& x, int k);
// x^(p/q) with q odd (real-valued for negative x), p >= 0.
Interval pow_rational(const Interval& x, int p, int q);
Interval sqrt(const Interval& x);
Interval cbrt(const Interval& x);
Interval exp(const Interval& x);
Interval sin(const Interval& x);
Interval cos(const Interval& x);

// Sign-aware real power used by point evaluation of p/q exponents.
double pow_rational(double x, int p, int q);

// Tolerance under which a slightly negative sqrt argument is clamped to 0.
inline constexpr double kSqrtClampTol = 1e-12;

}  // namespace na
