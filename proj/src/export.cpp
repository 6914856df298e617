#include "na/export.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "na/errors.hpp"

namespace na {

namespace {

namespace pt = boost::property_tree;

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char ch : s) {
    switch (ch) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      default: o += ch;
    }
  }
  return o;
}

// sum_j a_j x_j, zero terms dropped
std::string linear(const Eigen::VectorXd& a, const std::string& var) {
  std::string s;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    if (a[j] == 0.0) continue;
    if (s.empty()) {
      s = num(a[j]);
    } else {
      s += a[j] < 0 ? " - " : " + ";
      s += num(std::fabs(a[j]));
    }
    s += "*" + var + std::to_string(j);
  }
  return s.empty() ? "0" : s;
}

std::string box_constraint(const Box& b) {
  std::string s;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (i) s += " & ";
    s += "x" + std::to_string(i) + " >= " + num(b[i].lo) + " & x" + std::to_string(i) + " <= " + num(b[i].hi);
  }
  return s;
}

std::string invariant_text(const Polyhedron& p) {
  std::string s;
  for (const auto& h : p.halfspaces()) {
    if (!s.empty()) s += " & ";
    s += linear(h.a, "x") + " <= " + num(h.c);
  }
  return s;
}

std::vector<std::string> split_and(const std::string& s) {
  std::vector<std::string> out;
  std::size_t p = 0;
  while (true) {
    const std::size_t q = s.find('&', p);
    std::string part = s.substr(p, q == std::string::npos ? std::string::npos : q - p);
    const auto b = part.find_first_not_of(" \t\n\r");
    const auto e = part.find_last_not_of(" \t\n\r");
    if (b != std::string::npos) out.push_back(part.substr(b, e - b + 1));
    if (q == std::string::npos) break;
    p = q + 1;
  }
  return out;
}

class LinearReader {
 public:
  LinearReader(const std::string& s, int n) : s_(s), n_(n) {}

  // [coef * ]var terms and constants joined by + / -. Returns {coefs per var prefix, constant}.
  void read(std::map<char, Eigen::VectorXd>& coef, double& constant) {
    constant = 0.0;
    bool first = true;
    while (true) {
      skip();
      if (pos_ >= s_.size()) break;
      double sign = 1.0;
      if (s_[pos_] == '+' || s_[pos_] == '-') {
        sign = s_[pos_] == '-' ? -1.0 : 1.0;
        ++pos_;
        skip();
      } else if (!first) {
        break;
      }
      first = false;
      double c = 1.0;
      if (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' || s_[pos_] == '-')) {
        c = number();
        skip();
        if (pos_ < s_.size() && s_[pos_] == '*') {
          ++pos_;
          skip();
        } else {
          constant += sign * c;
          continue;
        }
      }
      if (pos_ >= s_.size() || !std::isalpha(static_cast<unsigned char>(s_[pos_])))
        throw SyntaxError("spaceex: expected a variable", pos_);
      const char prefix = s_[pos_++];
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) throw SyntaxError("spaceex: expected a variable index", pos_);
      const int idx = std::stoi(s_.substr(start, pos_ - start));
      if (idx >= n_) throw UnknownVariable("spaceex: variable index out of range");
      auto& v = coef[prefix];
      if (v.size() == 0) v = Eigen::VectorXd::Zero(n_);
      v[idx] += sign * c;
    }
  }
  std::size_t pos() const { return pos_; }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  double number() {
    double v = 0.0;
    const auto r = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (r.ec != std::errc()) throw SyntaxError("spaceex: bad number", pos_);
    pos_ = static_cast<std::size_t>(r.ptr - s_.data());
    return v;
  }

  const std::string& s_;
  int n_;
  std::size_t pos_ = 0;
};

struct Atom {
  std::map<char, Eigen::VectorXd> lhs;
  double lhs_const = 0.0;
  std::string op;
  double rhs = 0.0;
};

Atom parse_atom(const std::string& text, int n) {
  static const char* ops[] = {"<=", ">=", "=="};
  for (const char* op : ops) {
    const std::size_t k = text.find(op);
    if (k == std::string::npos) continue;
    Atom a;
    a.op = op;
    const std::string l = text.substr(0, k);
    LinearReader(l, n).read(a.lhs, a.lhs_const);
    const std::string r = text.substr(k + 2);
    std::map<char, Eigen::VectorXd> rc;
    double rconst = 0.0;
    LinearReader(r, n).read(rc, rconst);
    if (!rc.empty()) throw SyntaxError("spaceex: variables on the right of a constraint", k);
    a.rhs = rconst - a.lhs_const;
    return a;
  }
  throw SyntaxError("spaceex: no comparison in '" + text + "'", 0);
}

Box parse_box(const std::string& text, int n) {
  Box b(n, Interval(-INFINITY, INFINITY));
  for (const auto& part : split_and(text)) {
    if (part.rfind("loc(", 0) == 0) continue;
    const Atom a = parse_atom(part, n);
    const auto it = a.lhs.find('x');
    if (it == a.lhs.end()) throw UnsupportedShape("spaceex: constraint without a state variable");
    int idx = -1;
    for (int j = 0; j < n; ++j)
      if (it->second[j] != 0.0) {
        if (idx >= 0 || it->second[j] != 1.0) throw UnsupportedShape("spaceex: initial/bad sets must be boxes");
        idx = j;
      }
    if (idx < 0) throw UnsupportedShape("spaceex: empty constraint");
    if (a.op == ">=") b[idx].lo = a.rhs;
    else if (a.op == "<=") b[idx].hi = a.rhs;
    else b[idx] = Interval(a.rhs, a.rhs);
  }
  for (const auto& iv : b)
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi)) throw UnsupportedShape("spaceex: unbounded box");
  return b;
}

std::map<std::string, std::string> parse_cfg(const std::string& cfg) {
  std::map<std::string, std::string> kv;
  std::istringstream in(cfg);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\"");
      const auto e = s.find_last_not_of(" \t\r\"");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

}  // namespace

SpaceExFiles export_spaceex(const HybridAutomaton& ha) {
  const int n = ha.dim();
  std::string x = "<?xml version=\"1.0\" encoding=\"iso-8859-1\"?>\n";
  x += "<sspaceex xmlns=\"http://www-verimag.imag.fr/xml-namespaces/sspaceex\" version=\"0.2\" math=\"SpaceEx\">\n";
  x += "  <component id=\"na_abstraction\">\n";
  x += "    <note>domain: " + xml_escape(box_constraint(ha.domain)) + "</note>\n";
  for (int i = 0; i < n; ++i)
    x += "    <param name=\"x" + std::to_string(i) +
         "\" type=\"real\" local=\"false\" d1=\"1\" d2=\"1\" dynamics=\"any\" />\n";
  for (int i = 0; i < n; ++i)
    x += "    <param name=\"u" + std::to_string(i) +
         "\" type=\"real\" local=\"false\" d1=\"1\" d2=\"1\" dynamics=\"any\" controlled=\"false\" />\n";
  for (std::size_t k = 0; k < ha.modes.size(); ++k) {
    const Mode& m = ha.modes[k];
    x += "    <location id=\"" + std::to_string(k + 1) + "\" name=\"m" + to_bitstring(m.config) + "\">\n";
    std::string inv = invariant_text(m.invariant);
    for (int i = 0; i < n; ++i) {
      const std::string u = "u" + std::to_string(i);
      inv += (inv.empty() ? "" : " & ") + u + " >= " + num(-m.dist[i]) + " & " + u + " <= " + num(m.dist[i]);
    }
    x += "      <invariant>" + xml_escape(inv) + "</invariant>\n";
    std::string flow;
    for (int i = 0; i < n; ++i) {
      if (i) flow += " & ";
      flow += "x" + std::to_string(i) + "' == " + linear(m.A.row(i).transpose(), "x") + " + " + num(m.b[i]) +
              " + u" + std::to_string(i);
    }
    x += "      <flow>" + xml_escape(flow) + "</flow>\n";
    x += "    </location>\n";
  }
  for (const auto& t : ha.transitions) {
    x += "    <transition source=\"" + std::to_string(t.src + 1) + "\" target=\"" + std::to_string(t.dst + 1) +
         "\">\n";
    x += "      <guard>" + xml_escape(invariant_text(t.guard)) + "</guard>\n";
    x += "    </transition>\n";
  }
  x += "  </component>\n</sspaceex>\n";

  std::string c = "system = \"na_abstraction\"\n";
  c += "initially = \"" + box_constraint(ha.init) + "\"\n";
  c += "forbidden = \"" + box_constraint(ha.bad) + "\"\n";
  c += "scenario = \"supp\"\ndirections = \"oct\"\nsampling-time = 0.01\n";
  c += "time-horizon = " + num(ha.horizon) + "\n";
  c += "iter-max = -1\nrel-err = 1.0e-12\nabs-err = 1.0e-15\n";
  std::string outs;
  for (int i = 0; i < n; ++i) outs += (i ? ", x" : "x") + std::to_string(i);
  c += "output-variables = \"" + outs + "\"\noutput-format = \"GEN\"\n";
  return {x, c};
}

HybridAutomaton import_spaceex(const std::string& xml, const std::string& cfg) {
  pt::ptree tree;
  std::istringstream in(xml);
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw SyntaxError(std::string("spaceex xml: ") + e.message(), e.line());
  }
  const pt::ptree& comp = tree.get_child("sspaceex").get_child("component");
  int n = 0;
  for (const auto& [tag, node] : comp)
    if (tag == "param" && node.get<std::string>("<xmlattr>.name", "").rfind('x', 0) == 0) ++n;
  if (n == 0) throw ValidationError("spaceex: no state variables");

  HybridAutomaton ha;
  std::map<int, int> ids;
  for (const auto& [tag, node] : comp) {
    if (tag == "note") {
      const std::string s = node.data();
      if (s.rfind("domain:", 0) == 0) ha.domain = parse_box(s.substr(7), n);
    } else if (tag == "location") {
      Mode m;
      const std::string name = node.get<std::string>("<xmlattr>.name");
      m.config = from_bitstring(name.substr(1));
      m.invariant = Polyhedron(n);
      m.dist = Eigen::VectorXd::Zero(n);
      for (const auto& part : split_and(node.get<std::string>("invariant"))) {
        const Atom a = parse_atom(part, n);
        if (a.lhs.count('u')) {
          const Eigen::VectorXd& u = a.lhs.at('u');
          for (int i = 0; i < n; ++i)
            if (u[i] != 0.0 && a.op == "<=") m.dist[i] = a.rhs;
          continue;
        }
        if (a.op != "<=") throw UnsupportedShape("spaceex: invariants must be <= constraints");
        m.invariant.add({a.lhs.count('x') ? a.lhs.at('x') : Eigen::VectorXd::Zero(n), a.rhs});
      }
      m.A = Eigen::MatrixXd::Zero(n, n);
      m.b = Eigen::VectorXd::Zero(n);
      for (const auto& part : split_and(node.get<std::string>("flow"))) {
        const std::size_t tick = part.find('\'');
        if (tick == std::string::npos || part[0] != 'x') throw SyntaxError("spaceex: bad flow atom", 0);
        const int i = std::stoi(part.substr(1, tick - 1));
        const std::size_t eq = part.find("==");
        if (eq == std::string::npos) throw SyntaxError("spaceex: bad flow atom", tick);
        std::map<char, Eigen::VectorXd> coef;
        double cst = 0.0;
        LinearReader(part.substr(eq + 2), n).read(coef, cst);
        if (coef.count('x')) m.A.row(i) = coef.at('x').transpose();
        m.b[i] = cst;
      }
      ids[node.get<int>("<xmlattr>.id")] = static_cast<int>(ha.modes.size());
      ha.modes.push_back(std::move(m));
    }
  }
  for (const auto& [tag, node] : comp) {
    if (tag != "transition") continue;
    Transition t;
    t.src = ids.at(node.get<int>("<xmlattr>.source"));
    t.dst = ids.at(node.get<int>("<xmlattr>.target"));
    t.guard = Polyhedron(n);
    for (const auto& part : split_and(node.get<std::string>("guard", ""))) {
      const Atom a = parse_atom(part, n);
      t.guard.add({a.lhs.count('x') ? a.lhs.at('x') : Eigen::VectorXd::Zero(n), a.rhs});
    }
    ha.transitions.push_back(std::move(t));
  }

  const auto kv = parse_cfg(cfg);
  ha.init = parse_box(kv.at("initially"), n);
  ha.bad = parse_box(kv.at("forbidden"), n);
  ha.horizon = std::stod(kv.at("time-horizon"));
  if (ha.domain.empty()) throw ValidationError("spaceex: missing domain note");
  return ha;
}

std::vector<Eigen::Vector2d> mode_polygon(const Mode& m, const Box& domain) {
  if (domain.size() != 2) throw DimensionMismatch("mode_polygon needs a 2D domain");
  std::vector<Eigen::Vector2d> poly{{domain[0].lo, domain[1].lo},
                                    {domain[0].hi, domain[1].lo},
                                    {domain[0].hi, domain[1].hi},
                                    {domain[0].lo, domain[1].hi}};
  for (const auto& h : m.invariant.halfspaces()) {
    std::vector<Eigen::Vector2d> out;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Eigen::Vector2d& p = poly[k];
      const Eigen::Vector2d& q = poly[(k + 1) % poly.size()];
      const double fp = h.a.dot(p) - h.c, fq = h.a.dot(q) - h.c;
      if (fp <= 0) out.push_back(p);
      if ((fp < 0 && fq > 0) || (fp > 0 && fq < 0)) out.push_back(p + (fp / (fp - fq)) * (q - p));
    }
    poly = std::move(out);
    if (poly.empty()) break;
  }
  return poly;
}

namespace {

struct Frame {
  double x0, y0, w, h;     // pixel rectangle
  Interval u, v;           // data ranges
  double px(double a) const { return x0 + (a - u.lo) / u.width() * w; }
  double py(double b) const { return y0 + h - (b - v.lo) / v.width() * h; }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string rect(const Frame& f, Interval a, Interval b, const std::string& cls) {
  a = Interval(std::max(a.lo, f.u.lo), std::min(a.hi, f.u.hi));
  b = Interval(std::max(b.lo, f.v.lo), std::min(b.hi, f.v.hi));
  if (a.lo > a.hi || b.lo > b.hi) return "";
  return "<rect class=\"" + cls + "\" x=\"" + fmt(f.px(a.lo)) + "\" y=\"" + fmt(f.py(b.hi)) + "\" width=\"" +
         fmt(f.px(a.hi) - f.px(a.lo)) + "\" height=\"" + fmt(f.py(b.lo) - f.py(b.hi)) + "\"/>\n";
}

std::string frame_axes(const Frame& f, const std::string& xl, const std::string& yl) {
  std::string s = "<rect class=\"frame\" x=\"" + fmt(f.x0) + "\" y=\"" + fmt(f.y0) + "\" width=\"" + fmt(f.w) +
                  "\" height=\"" + fmt(f.h) + "\"/>\n";
  s += "<text x=\"" + fmt(f.x0 + f.w / 2) + "\" y=\"" + fmt(f.y0 + f.h + 28) + "\">" + xl + "</text>\n";
  s += "<text x=\"" + fmt(f.x0 - 34) + "\" y=\"" + fmt(f.y0 + f.h / 2) + "\">" + yl + "</text>\n";
  s += "<text class=\"tick\" x=\"" + fmt(f.x0) + "\" y=\"" + fmt(f.y0 + f.h + 14) + "\">" + num(f.u.lo) + "</text>\n";
  s += "<text class=\"tick\" x=\"" + fmt(f.x0 + f.w - 16) + "\" y=\"" + fmt(f.y0 + f.h + 14) + "\">" + num(f.u.hi) +
       "</text>\n";
  s += "<text class=\"tick\" x=\"" + fmt(f.x0 - 30) + "\" y=\"" + fmt(f.y0 + f.h) + "\">" + num(f.v.lo) + "</text>\n";
  s += "<text class=\"tick\" x=\"" + fmt(f.x0 - 30) + "\" y=\"" + fmt(f.y0 + 10) + "\">" + num(f.v.hi) + "</text>\n";
  return s;
}

const char* kStyle =
    "<style>\n"
    ".frame{fill:none;stroke:#000;stroke-width:1}\n"
    ".mode{stroke:#555;stroke-width:0.5;fill-opacity:0.35}\n"
    ".flowpipe{fill:#1f5fbf;fill-opacity:0.25;stroke:#1f5fbf;stroke-width:0.3}\n"
    ".init{fill:#2a9d3a;fill-opacity:0.6}\n"
    ".bad{fill:#d62828;fill-opacity:0.6}\n"
    "text{font-family:sans-serif;font-size:12px}\n"
    ".tick{font-size:9px}\n"
    "</style>\n";

}  // namespace

std::string plot_svg(const HybridAutomaton& ha, const Flowpipe* fp) {
  const int n = ha.dim();
  std::string body;
  double W = 560, H = 560;
  if (n == 2) {
    const Frame f{50, 20, 480, 480, ha.domain[0], ha.domain[1]};
    for (std::size_t k = 0; k < ha.modes.size(); ++k) {
      const auto poly = mode_polygon(ha.modes[k], ha.domain);
      std::string pts;
      for (const auto& p : poly) pts += (pts.empty() ? "" : " ") + fmt(f.px(p[0])) + "," + fmt(f.py(p[1]));
      const int hue = static_cast<int>((k * 137) % 360);
      body += "<polygon class=\"mode\" fill=\"hsl(" + std::to_string(hue) + ",60%,70%)\" points=\"" + pts +
              "\"><title>" + to_bitstring(ha.modes[k].config) + "</title></polygon>\n";
    }
    if (fp)
      for (const auto& s : fp->segments) body += rect(f, s.box[0], s.box[1], "flowpipe");
    body += rect(f, ha.init[0], ha.init[1], "init");
    body += rect(f, ha.bad[0], ha.bad[1], "bad");
    body += frame_axes(f, "x0", "x1");
  } else {
    const double ph = 200;
    H = 20 + n * (ph + 50);
    const Interval time(0.0, ha.horizon > 0 ? ha.horizon : 1.0);
    for (int i = 0; i < n; ++i) {
      const Frame f{50, 20 + i * (ph + 50), 480, ph, time, ha.domain[i]};
      if (fp)
        for (const auto& s : fp->segments) body += rect(f, Interval(s.t_lo, s.t_hi), s.box[i], "flowpipe");
      body += rect(f, Interval(0.0, time.width() * 0.01), ha.init[i], "init");
      body += rect(f, time, ha.bad[i], "bad");
      body += frame_axes(f, "t", "x" + std::to_string(i));
    }
  }
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(W) + "\" height=\"" + fmt(H) +
         "\" viewBox=\"0 0 " + fmt(W) + " " + fmt(H) + "\">\n" + kStyle + body + "</svg>\n";
}

}  // namespace na
