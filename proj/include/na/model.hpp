#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "na/box.hpp"
#include "na/expr.hpp"

namespace na {

/// Concrete nonlinear model  x' = f(x) + d,  |d_i| <= delta.
struct DynamicalModel {
  std::string name;
  std::vector<std::string> vars;
  std::vector<Expr> flow;
  double delta = 0.0;
  Box domain;
  Box init;
  Box bad;
  double horizon = 1.0;
  std::vector<std::string> warnings;

  int dim() const { return static_cast<int>(vars.size()); }
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;
};

/// Parses the line-oriented `key = value` model format and validates it.
DynamicalModel parse_model(const std::string& text);
DynamicalModel load_model(const std::filesystem::path& path);
/// Inverse of parse_model.
std::string format_model(const DynamicalModel& m);

/// Shape checks, init inside domain, horizon > 0 and f defined on the
/// whole domain (interval evaluation). Throws ValidationError.
void validate(DynamicalModel& m);

}  // namespace na
