#include "xtalk/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "xtalk/fit.hpp"

namespace xtalk {

namespace {

// Fixed-precision formatting keeps figures byte-identical across runs.
std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

int pauli_index(const std::string& label, int n_qubits) {
  const auto& labels = pauli_labels(n_qubits);
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end())
    throw ValidationError("unknown Pauli label: " + label);
  return static_cast<int>(it - labels.begin());
}

// Restrict a 15-entry two-qubit coefficient vector to one qubit's local
// sector: qubit 0 reads {XI, YI, ZI}, qubit 1 reads {IX, IY, IZ}.
RVec local_sector(const RVec& full, int qubit) {
  static const char axes[3] = {'X', 'Y', 'Z'};
  RVec out(3);
  for (int a = 0; a < 3; ++a) {
    std::string label = qubit == 0 ? std::string{axes[a], 'I'}
                                   : std::string{'I', axes[a]};
    out(a) = full(pauli_index(label, 2));
  }
  return out;
}

std::string layer_target(const Layer& l) {
  return std::string(gate_name(l.q0)) + ":" + gate_name(l.q1);
}

std::string gauge_note_for(Gate g) {
  switch (g) {
    case Gate::I:
      return "all Hamiltonian components gauge-invariant";
    case Gate::X:
      return "h_X gauge-invariant; h_Y and h_Z carry gauge";
    case Gate::Y:
      return "h_Y gauge-invariant; h_X and h_Z carry gauge";
  }
  return "";
}

nlohmann::json vec_json(const RVec& v, const std::optional<RVec>& hw,
                        const std::vector<std::string>& names) {
  nlohmann::json out = nlohmann::json::object();
  for (int i = 0; i < v.size(); ++i)
    out[names[i]] = scalar_json(
        v(i), hw ? std::optional<double>((*hw)(i)) : std::nullopt);
  return out;
}

}  // namespace

nlohmann::json scalar_json(double value, std::optional<double> half_width) {
  nlohmann::json j;
  j["value"] = value;
  if (half_width)
    j["half_width"] = *half_width;
  else
    j["half_width"] = nullptr;
  return j;
}

std::vector<GateErrorReport> gate_error_reports(
    const GateSetModel& m, const std::vector<GateSetModel>* replicates) {
  std::vector<GateErrorReport> out;
  for (int i0 = 0; i0 < 3; ++i0)
    for (int i1 = 0; i1 < 3; ++i1) {
      Layer layer{static_cast<Gate>(i0), static_cast<Gate>(i1)};
      GateDecomposition dec =
          decompose_gate(m.layer_channel(layer), layer_target(layer));
      for (int q = 0; q < 2; ++q) {
        Gate own = q == 0 ? layer.q0 : layer.q1;
        Gate other = q == 0 ? layer.q1 : layer.q0;
        GateErrorReport rep;
        rep.gate = std::string(gate_name(own)) + ":" + std::to_string(q);
        rep.context = "q" + std::to_string(1 - q) + ":" + gate_name(other);
        rep.hamiltonian.h = local_sector(dec.dh.h, q);
        rep.stochastic.s = local_sector(dec.s.s, q);
        rep.gauge_note = gauge_note_for(own);
        if (replicates && !replicates->empty()) {
          std::vector<std::vector<double>> hs(3), ss(3);
          for (const GateSetModel& r : *replicates) {
            GateDecomposition rd =
                decompose_gate(r.layer_channel(layer), layer_target(layer));
            RVec rh = local_sector(rd.dh.h, q);
            RVec rs = local_sector(rd.s.s, q);
            for (int a = 0; a < 3; ++a) {
              hs[a].push_back(rh(a));
              ss[a].push_back(rs(a));
            }
          }
          RVec hw(3), sw(3);
          for (int a = 0; a < 3; ++a) {
            hw(a) = percentile_half_width(hs[a]);
            sw(a) = percentile_half_width(ss[a]);
          }
          rep.hamiltonian.half_widths = hw;
          rep.stochastic.half_widths = sw;
        }
        out.push_back(std::move(rep));
      }
    }
  return out;
}

double layer_coupling_coefficient(const GateSetModel& m, const Layer& layer,
                                  const std::string& pauli) {
  GateDecomposition dec =
      decompose_gate(m.layer_channel(layer), layer_target(layer));
  return dec.dh.h(pauli_index(pauli, 2));
}

nlohmann::json comparison_json(const ComparisonReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ModelRow& r : rep.rows) {
    nlohmann::json row;
    row["family"] = family_name(r.family);
    row["n_params"] = r.n_params;
    row["lambda"] = scalar_json(r.lambda);
    row["k"] = r.k;
    row["n_sigma"] = scalar_json(r.n_sigma);
    row["wildcard"] = scalar_json(r.wildcard);
    row["avg_diamond"] = scalar_json(
        r.avg_diamond, r.avg_diamond_ci > 0.0
                           ? std::optional<double>(r.avg_diamond_ci)
                           : std::nullopt);
    rows.push_back(std::move(row));
  }
  nlohmann::json sel;
  sel["selected"] = family_name(rep.selection.selected);
  sel["gamma_cd_over_cf"] = scalar_json(rep.selection.gamma_cd_over_cf);
  sel["gamma_gen_over_cd"] = scalar_json(rep.selection.gamma_gen_over_cd);
  sel["threshold"] = rep.selection.threshold;
  sel["rule"] = rep.selection.rule;
  return nlohmann::json{{"models", rows}, {"selection", sel}};
}

nlohmann::json gate_errors_json(const std::vector<GateErrorReport>& reports) {
  static const std::vector<std::string> axes{"X", "Y", "Z"};
  nlohmann::json out = nlohmann::json::array();
  for (const GateErrorReport& r : reports) {
    nlohmann::json j;
    j["gate"] = r.gate;
    j["context"] = r.context;
    // Radians internally, milliradians in reports.
    RVec h_mrad = 1e3 * r.hamiltonian.h;
    std::optional<RVec> h_hw;
    if (r.hamiltonian.half_widths)
      h_hw = RVec(1e3 * *r.hamiltonian.half_widths);
    j["hamiltonian_mrad"] = vec_json(h_mrad, h_hw, axes);
    j["stochastic"] = vec_json(r.stochastic.s, r.stochastic.half_widths, axes);
    j["gauge_note"] = r.gauge_note;
    out.push_back(std::move(j));
  }
  return out;
}

nlohmann::json rb_json(const RBResult& res) {
  nlohmann::json cells = nlohmann::json::array();
  for (const RbCell& c : res.cells) {
    nlohmann::json j;
    j["qubit"] = c.qubit;
    j["spectator_driven"] = c.spectator_driven;
    j["a"] = scalar_json(c.fit.a, c.fit.a_hw);
    j["b"] = scalar_json(c.fit.b, c.fit.b_hw);
    j["p"] = scalar_json(c.fit.p, c.fit.p_hw);
    j["r"] = scalar_json(c.fit.r, c.fit.r_hw);
    nlohmann::json depths = nlohmann::json::array();
    for (const DepthSuccess& d : c.depths)
      depths.push_back({{"depth", d.depth},
                        {"mean", d.mean},
                        {"per_circuit", d.per_circuit}});
    j["depths"] = std::move(depths);
    cells.push_back(std::move(j));
  }
  return nlohmann::json{{"cells", cells}};
}

nlohmann::json fit_fragment_json(const std::vector<FitResult>& fits) {
  nlohmann::json out = nlohmann::json::array();
  for (const FitResult& f : fits) {
    nlohmann::json j;
    j["family"] = family_name(f.model.family);
    j["theta"] = std::vector<double>(
        f.model.theta.data(), f.model.theta.data() + f.model.theta.size());
    j["loglike"] = f.loglike;
    j["lambda"] = scalar_json(f.lambda);
    j["k"] = f.k;
    j["n_sigma"] = scalar_json(f.n_sigma);
    j["per_circuit_llr"] = f.per_circuit_llr;
    j["converged"] = f.diag.converged;
    j["iterations"] = f.diag.iterations;
    j["grad_norm"] = f.diag.grad_norm;
    j["cp_violation"] = f.diag.cp_violation;
    out.push_back(std::move(j));
  }
  return nlohmann::json{{"fits", out}};
}

std::vector<FitResult> fits_from_fragment(const nlohmann::json& fragment) {
  std::vector<FitResult> out;
  for (const auto& j : fragment.at("fits")) {
    FitResult f;
    f.model.family = family_from_name(j.at("family").get<std::string>());
    auto theta = j.at("theta").get<std::vector<double>>();
    f.model.theta = Eigen::Map<const Eigen::VectorXd>(
        theta.data(), static_cast<Eigen::Index>(theta.size()));
    f.loglike = j.at("loglike").get<double>();
    f.lambda = j.at("lambda").at("value").get<double>();
    f.k = j.at("k").get<int>();
    f.n_sigma = j.at("n_sigma").at("value").get<double>();
    f.per_circuit_llr = j.at("per_circuit_llr").get<std::vector<double>>();
    f.diag.converged = j.at("converged").get<bool>();
    f.diag.iterations = j.at("iterations").get<int>();
    f.diag.grad_norm = j.at("grad_norm").get<double>();
    f.diag.cp_violation = j.at("cp_violation").get<double>();
    out.push_back(std::move(f));
  }
  return out;
}

// --- SVG --------------------------------------------------------------------

namespace {

constexpr const char* kSvgHeader =
    "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";

std::string svg_open(int w, int h) {
  std::ostringstream s;
  s << kSvgHeader << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
    << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  return s.str();
}

std::string text_at(double x, double y, const std::string& t,
                    int size = 11) {
  std::ostringstream s;
  s << "<text x=\"" << fmt(x, 1) << "\" y=\"" << fmt(y, 1)
    << "\" font-family=\"monospace\" font-size=\"" << size << "\">" << t
    << "</text>\n";
  return s.str();
}

std::string line_at(double x1, double y1, double x2, double y2,
                    const std::string& color, double width = 1.0) {
  std::ostringstream s;
  s << "<line x1=\"" << fmt(x1, 2) << "\" y1=\"" << fmt(y1, 2) << "\" x2=\""
    << fmt(x2, 2) << "\" y2=\"" << fmt(y2, 2) << "\" stroke=\"" << color
    << "\" stroke-width=\"" << fmt(width, 2) << "\"/>\n";
  return s.str();
}

}  // namespace

std::string decay_curves_svg(const RBResult& res) {
  const int pw = 320, ph = 240;
  std::ostringstream s;
  s << svg_open(2 * pw, 2 * ph);
  for (std::size_t c = 0; c < res.cells.size() && c < 4; ++c) {
    const RbCell& cell = res.cells[c];
    double ox = static_cast<double>((c % 2) * pw) + 40.0;
    double oy = static_cast<double>((c / 2) * ph) + 20.0;
    double plot_w = pw - 60.0, plot_h = ph - 60.0;
    double dmax = 1.0;
    for (const DepthSuccess& d : cell.depths)
      dmax = std::max(dmax, static_cast<double>(d.depth));
    auto xpos = [&](double depth) { return ox + plot_w * depth / dmax; };
    auto ypos = [&](double p) { return oy + plot_h * (1.0 - p); };
    s << "<g>\n";
    s << text_at(ox, oy - 6.0,
                 "qubit " + std::to_string(cell.qubit) +
                     (cell.spectator_driven ? " spectator driven"
                                            : " spectator idle"));
    // Axes.
    s << line_at(ox, oy, ox, oy + plot_h, "black");
    s << line_at(ox, oy + plot_h, ox + plot_w, oy + plot_h, "black");
    // Per-circuit spread as a vertical whisker, mean as a dot.
    for (const DepthSuccess& d : cell.depths) {
      double lo = 1.0, hi = 0.0;
      for (double v : d.per_circuit) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      s << line_at(xpos(d.depth), ypos(lo), xpos(d.depth), ypos(hi), "gray");
      s << "<circle cx=\"" << fmt(xpos(d.depth), 2) << "\" cy=\""
        << fmt(ypos(d.mean), 2) << "\" r=\"2.5\" fill=\"black\"/>\n";
    }
    // Fitted curve, sampled densely.
    std::ostringstream pts;
    for (int i = 0; i <= 100; ++i) {
      double depth = dmax * i / 100.0;
      double p = cell.fit.a + cell.fit.b * std::pow(cell.fit.p, depth);
      pts << fmt(xpos(depth), 2) << "," << fmt(ypos(std::clamp(p, 0.0, 1.0)), 2)
          << " ";
    }
    s << "<polyline points=\"" << pts.str()
      << "\" fill=\"none\" stroke=\"blue\" stroke-width=\"1.2\"/>\n";
    s << text_at(ox, oy + plot_h + 24.0,
                 "r = " + fmt(cell.fit.r, 5) + " +/- " +
                     fmt(cell.fit.r_hw, 5), 10);
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string hamiltonian_arrows_svg(
    const std::vector<GateErrorReport>& reports) {
  // One panel per gate (gate label + qubit); within a panel, one arrow from
  // the origin to (h_X, h_Y) in mrad per context, with an uncertainty
  // ellipse when half-widths are available.
  std::vector<std::string> panels;
  for (const GateErrorReport& r : reports)
    if (std::find(panels.begin(), panels.end(), r.gate) == panels.end())
      panels.push_back(r.gate);
  const int pw = 240, ph = 240;
  const int cols = 3;
  const int rows = (static_cast<int>(panels.size()) + cols - 1) / cols;
  double scale_max = 1.0;  // mrad
  for (const GateErrorReport& r : reports)
    scale_max = std::max({scale_max, std::abs(1e3 * r.hamiltonian.h(0)),
                          std::abs(1e3 * r.hamiltonian.h(1))});
  std::ostringstream s;
  s << svg_open(cols * pw, std::max(rows, 1) * ph);
  static const char* colors[3] = {"crimson", "seagreen", "royalblue"};
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    double cx = static_cast<double>((pi % cols) * pw) + pw / 2.0;
    double cy = static_cast<double>((pi / cols) * ph) + ph / 2.0;
    double unit = (pw / 2.0 - 30.0) / scale_max;
    s << "<g>\n";
    s << text_at(cx - pw / 2.0 + 10.0, cy - ph / 2.0 + 14.0,
                 panels[pi] + " (mrad)");
    s << line_at(cx - pw / 2.0 + 15.0, cy, cx + pw / 2.0 - 15.0, cy,
                 "lightgray");
    s << line_at(cx, cy - ph / 2.0 + 20.0, cx, cy + ph / 2.0 - 15.0,
                 "lightgray");
    int ci = 0;
    for (const GateErrorReport& r : reports) {
      if (r.gate != panels[pi]) continue;
      double hx = 1e3 * r.hamiltonian.h(0), hy = 1e3 * r.hamiltonian.h(1);
      double px = cx + unit * hx, py = cy - unit * hy;
      const char* color = colors[ci % 3];
      s << line_at(cx, cy, px, py, color, 1.5);
      if (r.hamiltonian.half_widths) {
        double rx = unit * 1e3 * (*r.hamiltonian.half_widths)(0);
        double ry = unit * 1e3 * (*r.hamiltonian.half_widths)(1);
        s << "<ellipse cx=\"" << fmt(px, 2) << "\" cy=\"" << fmt(py, 2)
          << "\" rx=\"" << fmt(std::max(rx, 0.5), 2) << "\" ry=\""
          << fmt(std::max(ry, 0.5), 2) << "\" fill=\"none\" stroke=\""
          << color << "\"/>\n";
      }
      s << text_at(cx - pw / 2.0 + 10.0, cy + ph / 2.0 - 28.0 + 11.0 * ci,
                   r.context + " h=(" + fmt(hx, 2) + "," + fmt(hy, 2) + ")",
                   9);
      ++ci;
    }
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string comparison_table_svg(const ComparisonReport& rep) {
  const int w = 640, row_h = 22;
  const int h = row_h * 7;
  std::ostringstream s;
  s << svg_open(w, h);
  const double cols[6] = {10, 170, 260, 360, 460, 550};
  const char* heads[6] = {"model",    "n_params", "lambda",
                          "n_sigma",  "wildcard", "avg_diamond"};
  for (int c = 0; c < 6; ++c) s << text_at(cols[c], row_h, heads[c]);
  s << line_at(10, row_h + 6, w - 10, row_h + 6, "black");
  for (int i = 0; i < 3; ++i) {
    const ModelRow& r = rep.rows[i];
    double y = row_h * (i + 2.0);
    s << text_at(cols[0], y, family_name(r.family));
    s << text_at(cols[1], y, std::to_string(r.n_params));
    s << text_at(cols[2], y, fmt(r.lambda, 1));
    s << text_at(cols[3], y, fmt(r.n_sigma, 2));
    s << text_at(cols[4], y, fmt(r.wildcard, 5));
    s << text_at(cols[5], y, fmt(r.avg_diamond, 5));
  }
  s << text_at(10, row_h * 6.0, "selected: " +
                                    std::string(family_name(
                                        rep.selection.selected)));
  s << text_at(10, row_h * 6.8, rep.selection.rule, 9);
  s << "</svg>\n";
  return s.str();
}

bool svg_is_well_formed(const std::string& svg) {
  // Minimal XML scan: exactly one root element, balanced tags, quoted
  // attribute values, no stray '<' or '>'.
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool seen_root = false;
  // Optional XML declaration.
  if (svg.rfind("<?xml", 0) == 0) {
    i = svg.find("?>");
    if (i == std::string::npos) return false;
    i += 2;
  }
  while (i < svg.size()) {
    char c = svg[i];
    if (c == '>') return false;
    if (c != '<') {
      ++i;
      continue;
    }
    std::size_t end = svg.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = svg.substr(i + 1, end - i - 1);
    if (tag.find('<') != std::string::npos) return false;
    if (!tag.empty() && tag[0] == '/') {  // closing tag
      std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else {
      bool self_closing = !tag.empty() && tag.back() == '/';
      std::string body = self_closing ? tag.substr(0, tag.size() - 1) : tag;
      std::size_t sp = body.find_first_of(" \t\n");
      std::string name = sp == std::string::npos ? body : body.substr(0, sp);
      if (name.empty()) return false;
      // Attribute values must be double-quoted: quotes balance and every
      // '=' outside a quoted value is immediately followed by one.
      bool in_quote = false;
      for (std::size_t b = 0; b < body.size(); ++b) {
        if (body[b] == '"') {
          in_quote = !in_quote;
        } else if (body[b] == '=' && !in_quote) {
          std::size_t v = b + 1;
          while (v < body.size() &&
                 std::isspace(static_cast<unsigned char>(body[v])))
            ++v;
          if (v >= body.size() || body[v] != '"') return false;
        }
      }
      if (in_quote) return false;
      if (stack.empty()) {
        if (seen_root) return false;  // second root element
        seen_root = true;
      }
      if (!self_closing) stack.push_back(name);
      if (self_closing && stack.empty() && svg.find('<', end) == std::string::npos)
        return false;  // root cannot be self-closing here
    }
    if (stack.empty() && seen_root) {
      // After the root closes only whitespace may follow.
      for (std::size_t j = end + 1; j < svg.size(); ++j)
        if (!std::isspace(static_cast<unsigned char>(svg[j]))) return false;
      return true;
    }
    i = end + 1;
  }
  return false;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp);
    out << content;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("cannot rename " + tmp + " to " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace xtalk
