#include "na/box.hpp"

#include "na/errors.hpp"

namespace na {

Box make_box(std::span<const double> lo, std::span<const double> hi) {
  if (lo.size() != hi.size()) throw DimensionMismatch("box bounds differ in length");
  Box b(lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i) b[i] = {lo[i], hi[i]};
  return b;
}

Eigen::VectorXd box_lo(const Box& b) {
  Eigen::VectorXd v(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) v[i] = b[i].lo;
  return v;
}

Eigen::VectorXd box_hi(const Box& b) {
  Eigen::VectorXd v(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) v[i] = b[i].hi;
  return v;
}

Eigen::VectorXd box_center(const Box& b) {
  Eigen::VectorXd v(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) v[i] = b[i].mid();
  return v;
}

Eigen::VectorXd box_widths(const Box& b) {
  Eigen::VectorXd v(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) v[i] = b[i].width();
  return v;
}

double box_volume(const Box& b) {
  double v = 1.0;
  for (const auto& iv : b) v *= iv.width();
  return v;
}

bool box_contains(const Box& b, const Eigen::VectorXd& x, double tol) {
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (x[i] < b[i].lo - tol || x[i] > b[i].hi + tol) return false;
  }
  return true;
}

bool box_contains(const Box& outer, const Box& inner, double tol) {
  for (std::size_t i = 0; i < outer.size(); ++i) {
    if (inner[i].lo < outer[i].lo - tol || inner[i].hi > outer[i].hi + tol) return false;
  }
  return true;
}

bool boxes_overlap(const Box& a, const Box& b, double tol) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].hi < b[i].lo - tol || b[i].hi < a[i].lo - tol) return false;
  }
  return true;
}

Box box_hull(const Box& a, const Box& b) {
  Box r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = hull(a[i], b[i]);
  return r;
}

Box box_intersect(const Box& a, const Box& b) {
  Box r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = intersect(a[i], b[i]);
  return r;
}

bool box_is_empty(const Box& b) {
  for (const auto& iv : b) {
    if (is_empty(iv)) return true;
  }
  return false;
}

Box box_inflate(const Box& b, double abs, double rel) {
  Box r(b);
  for (auto& iv : r) {
    const double d = abs + rel * iv.width();
    iv.lo -= d;
    iv.hi += d;
  }
  return r;
}

Eigen::VectorXd box_clamp(const Box& b, const Eigen::VectorXd& x) {
  Eigen::VectorXd y = x;
  for (std::size_t i = 0; i < b.size(); ++i) y[i] = std::clamp(y[i], b[i].lo, b[i].hi);
  return y;
}

}  // namespace na
