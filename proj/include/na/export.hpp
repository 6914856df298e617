#pragma once

#include <string>

#include "na/hybrid.hpp"
#include "na/reach.hpp"

namespace na {

struct SpaceExFiles {
  std::string xml;
  std::string cfg;
};

/// One location per mode (named by its configuration bitstring), flow
/// x' == A x + b + u with |u_i| <= dist_i, one edge per transition guarded by
/// the destination invariant. Variables are x0.., inputs u0...
SpaceExFiles export_spaceex(const HybridAutomaton& ha);
/// Reader for files produced by export_spaceex.
HybridAutomaton import_spaceex(const std::string& xml, const std::string& cfg);

/// 2D: one polygon per mode, flowpipe boxes, init and bad sets.
/// Otherwise one time plot per axis. `fp` may be null.
std::string plot_svg(const HybridAutomaton& ha, const Flowpipe* fp);

/// Clips the domain rectangle by the invariant (2D only). Vertices in order.
std::vector<Eigen::Vector2d> mode_polygon(const Mode& m, const Box& domain);

}  // namespace na
