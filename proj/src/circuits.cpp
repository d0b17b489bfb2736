#include "xtalk/circuits.hpp"

#include "xtalk/superop.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <random>
#include <unordered_set>

namespace xtalk {

const char* gate_name(Gate g) {
  switch (g) {
    case Gate::I: return "Gi";
    case Gate::X: return "Gxpi2";
    case Gate::Y: return "Gypi2";
  }
  return "?";
}

namespace {

Gate gate_from_name(const std::string& name, std::size_t offset) {
  if (name == "Gi") return Gate::I;
  if (name == "Gxpi2") return Gate::X;
  if (name == "Gypi2") return Gate::Y;
  throw ParseError("unknown gate label '" + name + "'", offset);
}

}  // namespace

Circuit parse_circuit(const std::string& text) {
  Circuit c;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (text[i] != '[') throw ParseError("expected '['", i);
    ++i;
    Layer layer;
    bool q_seen[2] = {false, false};
    while (true) {
      std::size_t name_start = i;
      while (i < n && text[i] != ':') ++i;
      if (i >= n) throw ParseError("expected ':' in gate", name_start);
      std::string name = text.substr(name_start, i - name_start);
      Gate g = gate_from_name(name, name_start);
      ++i;
      if (i >= n || (text[i] != '0' && text[i] != '1'))
        throw ParseError("qubit index must be 0 or 1", i);
      int q = text[i] - '0';
      if (q_seen[q]) throw ParseError("duplicate qubit in layer", i);
      q_seen[q] = true;
      (q == 0 ? layer.q0 : layer.q1) = g;
      ++i;
      if (i < n && text[i] == ',') {
        ++i;
        continue;
      }
      break;
    }
    if (i >= n || text[i] != ']') throw ParseError("expected ']'", i);
    ++i;
    c.layers.push_back(layer);
  }
  return c;
}

std::string serialize_circuit(const Circuit& c) {
  std::string out;
  for (const Layer& l : c.layers) {
    out += '[';
    out += gate_name(l.q0);
    out += ":0,";
    out += gate_name(l.q1);
    out += ":1]";
  }
  return out;
}

namespace {

Layer L(Gate a, Gate b) { return Layer{a, b}; }

Circuit C(std::vector<Layer> layers) { return Circuit{std::move(layers), {}}; }

constexpr Gate I = Gate::I, X = Gate::X, Y = Gate::Y;

}  // namespace

// Table of prep fiducials, germs, and measurement fiducials used in the
// experiment design; qubit 0 is qubit j, qubit 1 is qubit k.
const std::vector<Circuit>& prep_fiducials() {
  static const std::vector<Circuit> v = {
      C({}),
      C({L(I, X)}),
      C({L(I, Y)}),
      C({L(I, X), L(I, X)}),
      C({L(X, I)}),
      C({L(X, X), L(X, X), L(X, X)}),
      C({L(X, Y)}),
      C({L(X, X), L(I, X)}),
      C({L(Y, I)}),
      C({L(Y, X)}),
      C({L(Y, Y), L(Y, Y), L(Y, Y)}),
      C({L(Y, X), L(I, X)}),
      C({L(X, I), L(X, I)}),
      C({L(X, X), L(X, I)}),
      C({L(X, Y), L(X, I)}),
      C({L(X, X), L(X, X)}),
  };
  return v;
}

const std::vector<Circuit>& germs() {
  static const std::vector<Circuit> v = {
      C({L(I, I)}),
      C({L(I, X)}),
      C({L(I, Y)}),
      C({L(X, I)}),
      C({L(Y, I)}),
      C({L(X, X)}),
      C({L(Y, Y)}),
      C({L(X, Y)}),
      C({L(Y, X)}),
      C({L(X, X), L(Y, X), L(Y, Y)}),
      C({L(X, X), L(X, Y), L(Y, Y)}),
      C({L(Y, I), L(Y, X), L(X, X)}),
      C({L(I, Y), L(X, Y), L(X, X)}),
      C({L(Y, X), L(I, X), L(X, Y), L(X, I)}),
      C({L(X, I), L(Y, Y), L(X, Y)}),
      C({L(I, X), L(X, X), L(X, Y)}),
      C({L(Y, I), L(Y, Y), L(I, Y), L(X, I)}),
      C({L(Y, Y), L(X, Y), L(Y, X)}),
      C({L(Y, I), L(X, Y), L(Y, Y)}),
      C({L(I, Y), L(Y, X), L(X, I)}),
      C({L(I, X), L(I, Y)}),
      C({L(Y, Y), L(Y, X)}),
      C({L(X, I), L(Y, I)}),
      C({L(X, I), L(X, I), L(Y, I)}),
      C({L(I, X), L(I, X), L(I, Y)}),
  };
  return v;
}

const std::vector<Circuit>& meas_fiducials() {
  static const std::vector<Circuit> v = {
      C({}),
      C({L(I, X)}),
      C({L(I, Y)}),
      C({L(I, X), L(I, X)}),
      C({L(X, I)}),
      C({L(Y, I)}),
      C({L(X, I), L(X, I)}),
      C({L(X, X), L(X, X), L(X, X)}),
      C({L(X, Y)}),
      C({L(Y, X)}),
      C({L(Y, Y), L(Y, Y), L(Y, Y)}),
  };
  return v;
}

ExperimentDesign build_gst_design(int lmax) {
  if (lmax < 1 || (lmax & (lmax - 1)) != 0)
    throw ValidationError("lmax must be a power of two");
  ExperimentDesign design;
  design.lmax = lmax;
  design.provenance = "fixed fiducial/germ tables, n = floor(L/len), L in "
                      "{1,2,4,...,lmax}, n = 0 kept, dedup by serialization";
  std::unordered_set<std::string> seen;
  const auto& preps = prep_fiducials();
  const auto& gs = germs();
  const auto& meas = meas_fiducials();
  for (std::size_t pi = 0; pi < preps.size(); ++pi) {
    for (std::size_t gi = 0; gi < gs.size(); ++gi) {
      const int glen = gs[gi].depth();
      std::vector<int> reps;
      for (int l = 1; l <= lmax; l *= 2) {
        int n = l / glen;
        if (std::find(reps.begin(), reps.end(), n) == reps.end())
          reps.push_back(n);
      }
      std::sort(reps.begin(), reps.end());
      for (int n : reps) {
        for (std::size_t mi = 0; mi < meas.size(); ++mi) {
          Circuit c;
          c.layers = preps[pi].layers;
          for (int r = 0; r < n; ++r)
            c.layers.insert(c.layers.end(), gs[gi].layers.begin(),
                            gs[gi].layers.end());
          c.layers.insert(c.layers.end(), meas[mi].layers.begin(),
                          meas[mi].layers.end());
          std::string key = serialize_circuit(c);
          if (!seen.insert(key).second) continue;
          c.gst = GstStructure{preps[pi].depth(), glen, n, meas[mi].depth(),
                               static_cast<int>(gi)};
          design.circuits.push_back(std::move(c));
        }
      }
    }
  }
  return design;
}

const char* rb_mode_name(RbMode m) {
  switch (m) {
    case RbMode::Simultaneous: return "simultaneous";
    case RbMode::Q0Idle: return "q0-idle";
    case RbMode::Q1Idle: return "q1-idle";
  }
  return "?";
}

namespace {

using Mat2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;

Mat2 gate_unitary(Gate g) {
  const std::complex<double> mi(0, -1);
  const double s = 1.0 / std::sqrt(2.0);
  Mat2 u;
  switch (g) {
    case Gate::I: u.setIdentity(); break;
    case Gate::X: u << s, mi * s, mi * s, s; break;
    case Gate::Y: u << s, -s, s, s; break;
  }
  return u;
}

// Basis state reached by psi, or -1 if psi is not a basis state (up to
// phase).
int basis_state_of(const Vec2& psi) {
  if (std::abs(std::abs(psi(0)) - 1.0) < 1e-9) return 0;
  if (std::abs(std::abs(psi(1)) - 1.0) < 1e-9) return 1;
  return -1;
}

// Minimal-length word over {Gxpi2, Gypi2} returning psi to a basis state.
// Deterministic: shortest word, X-before-Y tie break. Returns the word in
// application order and sets `bit` to the final basis state.
std::vector<Gate> inversion_word(const Vec2& psi, int& bit) {
  std::vector<std::vector<Gate>> frontier = {{}};
  for (int len = 0; len <= 6; ++len) {
    for (const auto& word : frontier) {
      Vec2 v = psi;
      for (Gate g : word) v = gate_unitary(g) * v;
      int b = basis_state_of(v);
      if (b >= 0) {
        bit = b;
        return word;
      }
    }
    std::vector<std::vector<Gate>> next;
    for (const auto& word : frontier)
      for (Gate g : {Gate::X, Gate::Y}) {
        auto w = word;
        w.push_back(g);
        next.push_back(std::move(w));
      }
    frontier = std::move(next);
  }
  throw std::logic_error("inversion_word: no word of length <= 6 found");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<RbCircuit> sample_rb_circuits(const std::vector<int>& depths,
                                          int per_depth, RbMode mode,
                                          std::uint64_t seed) {
  for (int d : depths)
    if (d < 0) throw ValidationError("depths must be nonnegative");
  std::vector<RbCircuit> out;
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(mode)));
  auto draw_gate = [&rng]() {
    return static_cast<Gate>(rng() % 3);
  };
  for (int d : depths) {
    for (int rep = 0; rep < per_depth; ++rep) {
      RbCircuit rc;
      rc.mode = mode;
      rc.depth = d;
      Mat2 u0 = Mat2::Identity(), u1 = Mat2::Identity();
      for (int t = 0; t < d; ++t) {
        Layer layer;
        layer.q0 = (mode == RbMode::Q0Idle) ? Gate::I : draw_gate();
        layer.q1 = (mode == RbMode::Q1Idle) ? Gate::I : draw_gate();
        u0 = gate_unitary(layer.q0) * u0;
        u1 = gate_unitary(layer.q1) * u1;
        rc.circuit.layers.push_back(layer);
      }
      Vec2 zero;
      zero << 1, 0;
      int b0 = 0, b1 = 0;
      auto w0 = inversion_word(u0 * zero, b0);
      auto w1 = inversion_word(u1 * zero, b1);
      const std::size_t suffix = std::max(w0.size(), w1.size());
      for (std::size_t t = 0; t < suffix; ++t) {
        Layer layer;
        layer.q0 = t < w0.size() ? w0[t] : Gate::I;
        layer.q1 = t < w1.size() ? w1[t] : Gate::I;
        rc.circuit.layers.push_back(layer);
      }
      rc.target = std::string() + char('0' + b0) + char('0' + b1);
      out.push_back(std::move(rc));
    }
  }
  return out;
}

std::vector<Circuit> interleave(const std::vector<std::vector<Circuit>>& designs,
                                std::uint64_t seed) {
  std::vector<Circuit> all;
  for (const auto& d : designs) all.insert(all.end(), d.begin(), d.end());
  std::mt19937_64 rng(mix_seed(seed, 0x1e7e));
  // Hand-rolled Fisher-Yates: identical order across standard libraries.
  for (std::size_t i = all.size(); i > 1; --i) {
    std::uint64_t bound = i;
    std::uint64_t lim = std::numeric_limits<std::uint64_t>::max() -
                        std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= lim);
    std::swap(all[i - 1], all[r % bound]);
  }
  return all;
}

void write_design(const ExperimentDesign& d, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& c : d.circuits) f << serialize_circuit(c) << '\n';
}

ExperimentDesign read_design(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  ExperimentDesign d;
  std::string line;
  // An empty line is the depth-0 circuit, not padding.
  while (std::getline(f, line)) d.circuits.push_back(parse_circuit(line));
  return d;
}

}  // namespace xtalk
