#include "na/model.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "na/errors.hpp"

namespace na {

using nlohmann::json;

Eigen::VectorXd DynamicalModel::eval(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(dim());
  const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  for (int i = 0; i < dim(); ++i) out[i] = eval_point(flow[i], xs);
  return out;
}

namespace {

Box box_from_json(const json& j, const std::string& key) {
  if (!j.is_array()) throw ValidationError(key + ": expected a list of [lo, hi] pairs");
  Box b;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw ValidationError(key + ": expected [lo, hi]");
    const double lo = p[0].get<double>(), hi = p[1].get<double>();
    if (!(lo <= hi)) throw ValidationError(key + ": lo > hi");
    b.emplace_back(lo, hi);
  }
  return b;
}

json box_to_json(const Box& b) {
  json j = json::array();
  for (const auto& iv : b) j.push_back({iv.lo, iv.hi});
  return j;
}

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

DynamicalModel parse_model(const std::string& text) {
  std::map<std::string, json> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    // '#' inside a quoted string is part of the value
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SyntaxError("expected 'key = value'", line_start);
    const std::string key = trim(line.substr(0, eq));
    try {
      kv[key] = json::parse(line.substr(eq + 1));
    } catch (const json::parse_error& e) {
      throw SyntaxError("bad value for '" + key + "'", line_start + eq + 1);
    }
  }

  static const char* required[] = {"vars", "flow", "domain", "init", "bad", "horizon"};
  for (const char* k : required)
    if (!kv.count(k)) throw ValidationError(std::string("missing key '") + k + "'");
  for (const auto& [k, v] : kv) {
    static const std::vector<std::string> known{"name", "vars",  "flow",   "domain",
                                                "init", "bad",   "delta",  "horizon"};
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ValidationError("unknown key '" + k + "'");
  }

  DynamicalModel m;
  try {
    m.name = kv.count("name") ? kv["name"].get<std::string>() : "model";
    m.vars = kv["vars"].get<std::vector<std::string>>();
    const auto flows = kv["flow"].get<std::vector<std::string>>();
    for (const auto& f : flows) m.flow.push_back(parse(f, m.vars));
    m.delta = kv.count("delta") ? kv["delta"].get<double>() : 0.0;
    m.horizon = kv["horizon"].get<double>();
  } catch (const json::type_error& e) {
    throw ValidationError(std::string("malformed model: ") + e.what());
  }
  m.domain = box_from_json(kv["domain"], "domain");
  m.init = box_from_json(kv["init"], "init");
  m.bad = box_from_json(kv["bad"], "bad");
  validate(m);
  return m;
}

DynamicalModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_model(ss.str());
}

std::string format_model(const DynamicalModel& m) {
  json flows = json::array();
  for (const auto& e : m.flow) flows.push_back(e.to_string(m.vars));
  std::ostringstream out;
  out << "name = " << json(m.name).dump() << '\n'
      << "vars = " << json(m.vars).dump() << '\n'
      << "flow = " << flows.dump() << '\n'
      << "domain = " << box_to_json(m.domain).dump() << '\n'
      << "init = " << box_to_json(m.init).dump() << '\n'
      << "bad = " << box_to_json(m.bad).dump() << '\n'
      << "delta = " << json(m.delta).dump() << '\n'
      << "horizon = " << json(m.horizon).dump() << '\n';
  return out.str();
}

void validate(DynamicalModel& m) {
  const std::size_t n = m.vars.size();
  if (n == 0) throw ValidationError("no state variables");
  if (m.flow.size() != n) throw ValidationError("flow needs one expression per variable");
  if (m.domain.size() != n || m.init.size() != n || m.bad.size() != n)
    throw ValidationError("domain, init and bad must have one interval per variable");
  if (!(m.horizon > 0.0)) throw ValidationError("horizon must be positive");
  if (!(m.delta >= 0.0)) throw ValidationError("delta must be nonnegative");
  for (const auto& iv : m.domain)
    if (!(iv.width() > 0.0) || !iv.is_finite()) throw ValidationError("domain must be a bounded box");
  if (!box_contains(m.domain, m.init)) throw ValidationError("init is not inside the domain");
  m.warnings.clear();
  if (!boxes_overlap(m.domain, m.bad)) m.warnings.push_back("bad set misses the domain");
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const Interval r = eval_interval(m.flow[i], m.domain);
      if (!r.is_finite()) throw DomainError("unbounded");
    } catch (const DomainError& e) {
      throw ModelDomainError("flow[" + std::to_string(i) + "] is undefined on part of the domain (" +
                             e.what() + ")");
    }
  }
}

}  // namespace na
