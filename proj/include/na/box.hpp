#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "na/interval.hpp"

namespace na {

/// Axis-aligned box, one interval per axis.
using Box = IntervalVector;

Box make_box(std::span<const double> lo, std::span<const double> hi);
Eigen::VectorXd box_lo(const Box& b);
Eigen::VectorXd box_hi(const Box& b);
Eigen::VectorXd box_center(const Box& b);
Eigen::VectorXd box_widths(const Box& b);
double box_volume(const Box& b);
bool box_contains(const Box& b, const Eigen::VectorXd& x, double tol = 0.0);
bool box_contains(const Box& outer, const Box& inner, double tol = 0.0);
bool boxes_overlap(const Box& a, const Box& b, double tol = 0.0);
Box box_hull(const Box& a, const Box& b);
/// Empty result is signalled by an axis with lo > hi.
Box box_intersect(const Box& a, const Box& b);
bool box_is_empty(const Box& b);
Box box_inflate(const Box& b, double abs, double rel = 0.0);
/// Point-wise clamp into the box.
Eigen::VectorXd box_clamp(const Box& b, const Eigen::VectorXd& x);

}  // namespace na
