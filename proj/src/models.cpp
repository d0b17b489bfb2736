#include "xtalk/models.hpp"

#include "xtalk/errorgen.hpp"

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <fstream>
#include <sstream>

namespace xtalk {

using nlohmann::json;

const char* family_name(Family f) {
  switch (f) {
    case Family::CrosstalkFree: return "crosstalk-free";
    case Family::ContextDependent: return "context-dependent";
    case Family::General: return "general";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "crosstalk-free") return Family::CrosstalkFree;
  if (name == "context-dependent") return Family::ContextDependent;
  if (name == "general") return Family::General;
  throw ValidationError("unknown family: " + name);
}

int n_params(Family f) {
  switch (f) {
    case Family::CrosstalkFree: return 86;       // 2*(3*12) + 2*7
    case Family::ContextDependent: return 230;   // 2*(3*3*12) + 2*7
    case Family::General: return 2223;           // 9*240 + 15 + 3*16
  }
  return 0;
}

bool family_nested_in(Family small, Family large) {
  return static_cast<int>(small) < static_cast<int>(large);
}

void ChannelsAdjoint::set_zero() {
  for (auto& l : layer) l.setZero();
  rho.setZero();
  for (auto& e : effect) e.setZero();
}

std::string layer_label(const Layer& l) {
  return std::string(gate_name(l.q0)) + ":" + gate_name(l.q1);
}

Layer layer_from_label(const std::string& label) {
  auto colon = label.find(':');
  if (colon == std::string::npos)
    throw ValidationError("bad layer label: " + label);
  auto gate_of = [](const std::string& s) {
    if (s == "Gi") return Gate::I;
    if (s == "Gxpi2") return Gate::X;
    if (s == "Gypi2") return Gate::Y;
    throw ValidationError("bad gate in layer label: " + s);
  };
  return Layer{gate_of(label.substr(0, colon)), gate_of(label.substr(colon + 1))};
}

namespace {

// Parameter layout offsets.
//
// Crosstalk-free (86):
//   [q*36 + g*12 .. +12)            gate rows 1..3 of a 4x4 PTM, q in {0,1}
//   [72 + q*7 .. +3)                state Bloch components 1..3
//   [72 + q*7 + 3 .. +4)            free effect (outcome 0), 4 components
//
// Context-dependent (230):
//   [q*108 + (g*3 + ctx)*12 .. +12) gate rows, ctx = spectator gate
//   [216 + q*7 ...)                 SPAM as above
//
// General (2223):
//   [l*240 .. +240)                 layer rows 1..15 of a 16x16 PTM
//   [2160 .. +15)                   state components 1..15
//   [2175 + e*16 .. +16)            effects 00,01,10; effect 11 implied

constexpr int kCfSpam = 72;
constexpr int kCdSpam = 216;
constexpr int kGenRho = 2160;
constexpr int kGenEff = 2175;

Mat4 gate_block_to_ptm(const Eigen::VectorXd& theta, int off) {
  Mat4 g = Mat4::Zero();
  g(0, 0) = 1.0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) g(r + 1, c) = theta(off + 4 * r + c);
  return g;
}

void gate_ptm_to_block(const Mat4& g, Eigen::VectorXd& theta, int off) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) theta(off + 4 * r + c) = g(r + 1, c);
}

Vec4 state_from(const Eigen::VectorXd& theta, int off) {
  Vec4 v;
  v(0) = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < 3; ++i) v(i + 1) = theta(off + i);
  return v;
}

Vec4 effect0_from(const Eigen::VectorXd& theta, int off) {
  Vec4 v;
  for (int i = 0; i < 4; ++i) v(i) = theta(off + i);
  return v;
}

Vec4 identity_vec4() {
  Vec4 v = Vec4::Zero();
  v(0) = std::sqrt(2.0);
  return v;
}

Vec16 identity_vec16() {
  Vec16 v = Vec16::Zero();
  v(0) = 2.0;
  return v;
}

Vec16 kron_vec(const Vec4& a, const Vec4& b) {
  Vec16 out;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out(4 * i + j) = a(i) * b(j);
  return out;
}

Mat16 kron_mat(const Mat4& a, const Mat4& b) {
  Mat16 out;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k)
      out.block<4, 4>(4 * i, 4 * k) = a(i, k) * b;
  return out;
}

int cf_gate_off(int q, int g) { return q * 36 + g * 12; }
int cd_gate_off(int q, int g, int ctx) { return q * 108 + (g * 3 + ctx) * 12; }

// Per-qubit single-gate PTMs and SPAM of a factored model.
struct Factored {
  // [qubit][gate][context]; context ignored (single entry) for CF.
  Mat4 gate[2][3][3];
  Vec4 rho[2];
  Vec4 eff[2][2];  // [qubit][outcome]
};

Factored unpack_factored(const GateSetModel& m) {
  Factored f;
  const bool cd = m.family == Family::ContextDependent;
  const int spam_base = cd ? kCdSpam : kCfSpam;
  for (int q = 0; q < 2; ++q) {
    for (int g = 0; g < 3; ++g)
      for (int c = 0; c < 3; ++c) {
        int off = cd ? cd_gate_off(q, g, c) : cf_gate_off(q, g);
        f.gate[q][g][c] = gate_block_to_ptm(m.theta, off);
      }
    int so = spam_base + q * 7;
    f.rho[q] = state_from(m.theta, so);
    f.eff[q][0] = effect0_from(m.theta, so + 3);
    f.eff[q][1] = identity_vec4() - f.eff[q][0];
  }
  return f;
}

Mat4 ideal_gate_ptm(int g) {
  const Cplx mi(0, -1);
  const auto& p = pauli_matrices();
  CMat u;
  switch (g) {
    case 0: u = CMat::Identity(2, 2); break;
    case 1: u = (mi * M_PI / 4.0 * p[1]).exp(); break;
    default: u = (mi * M_PI / 4.0 * p[2]).exp(); break;
  }
  return ptm_from_unitary(u).m;
}

}  // namespace

Channels GateSetModel::channels() const {
  Channels ch;
  if (family == Family::General) {
    for (int l = 0; l < 9; ++l) {
      Mat16& g = ch.layer[l];
      g.setZero();
      g(0, 0) = 1.0;
      int off = l * 240;
      for (int r = 0; r < 15; ++r)
        for (int c = 0; c < 16; ++c) g(r + 1, c) = theta(off + 16 * r + c);
    }
    ch.rho(0) = 0.5;
    for (int i = 0; i < 15; ++i) ch.rho(i + 1) = theta(kGenRho + i);
    Vec16 sum = Vec16::Zero();
    for (int e = 0; e < 3; ++e) {
      for (int i = 0; i < 16; ++i) ch.effect[e](i) = theta(kGenEff + e * 16 + i);
      sum += ch.effect[e];
    }
    ch.effect[3] = identity_vec16() - sum;
    return ch;
  }
  Factored f = unpack_factored(*this);
  const bool cd = family == Family::ContextDependent;
  for (int g0 = 0; g0 < 3; ++g0)
    for (int g1 = 0; g1 < 3; ++g1) {
      const Mat4& a = f.gate[0][g0][cd ? g1 : 0];
      const Mat4& b = f.gate[1][g1][cd ? g0 : 0];
      ch.layer[3 * g0 + g1] = kron_mat(a, b);
    }
  ch.rho = kron_vec(f.rho[0], f.rho[1]);
  for (int b0 = 0; b0 < 2; ++b0)
    for (int b1 = 0; b1 < 2; ++b1)
      ch.effect[2 * b0 + b1] = kron_vec(f.eff[0][b0], f.eff[1][b1]);
  return ch;
}

ProcessMatrix GateSetModel::layer_channel(const Layer& l) const {
  Channels ch = channels();
  return ProcessMatrix(16, ch.layer[l.index()]);
}

GateSetModel instantiate_ideal(Family f) {
  GateSetModel m;
  m.family = f;
  m.theta = Eigen::VectorXd::Zero(n_params(f));
  m.description = "ideal";
  if (f == Family::General) {
    for (int g0 = 0; g0 < 3; ++g0)
      for (int g1 = 0; g1 < 3; ++g1) {
        Mat16 g = kron_mat(ideal_gate_ptm(g0), ideal_gate_ptm(g1));
        int off = (3 * g0 + g1) * 240;
        for (int r = 0; r < 15; ++r)
          for (int c = 0; c < 16; ++c) m.theta(off + 16 * r + c) = g(r + 1, c);
      }
    // Ideal |0> has Pauli vector (1,0,0,1)/sqrt(2).
    Vec4 rho1;
    rho1 << 1.0 / std::sqrt(2.0), 0, 0, 1.0 / std::sqrt(2.0);
    Vec16 rho = kron_vec(rho1, rho1);
    for (int i = 0; i < 15; ++i) m.theta(kGenRho + i) = rho(i + 1);
    Vec4 e0;
    e0 << 1.0 / std::sqrt(2.0), 0, 0, 1.0 / std::sqrt(2.0);
    Vec4 e1 = identity_vec4() - e0;
    Vec16 eff[3] = {kron_vec(e0, e0), kron_vec(e0, e1), kron_vec(e1, e0)};
    for (int e = 0; e < 3; ++e)
      for (int i = 0; i < 16; ++i) m.theta(kGenEff + e * 16 + i) = eff[e](i);
    return m;
  }
  const bool cd = f == Family::ContextDependent;
  for (int q = 0; q < 2; ++q) {
    for (int g = 0; g < 3; ++g) {
      Mat4 ptm = ideal_gate_ptm(g);
      if (cd) {
        for (int c = 0; c < 3; ++c)
          gate_ptm_to_block(ptm, m.theta, cd_gate_off(q, g, c));
      } else {
        gate_ptm_to_block(ptm, m.theta, cf_gate_off(q, g));
      }
    }
    int so = (cd ? kCdSpam : kCfSpam) + q * 7;
    m.theta(so + 2) = 1.0 / std::sqrt(2.0);  // Bloch z of |0>
    m.theta(so + 3) = 1.0 / std::sqrt(2.0);  // effect 0 = (I + Z)/2
    m.theta(so + 6) = 1.0 / std::sqrt(2.0);
  }
  return m;
}

namespace {

// Deterministic gaussian stream, independent of the standard library's
// distribution implementations.
struct GaussStream {
  std::uint64_t state;
  explicit GaussStream(std::uint64_t seed) : state(seed ^ 0x5851f42d4c957f2dULL) {}
  double uniform() {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    std::uint64_t x = state;
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
  }
  double gauss() {
    double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
};

}  // namespace

GateSetModel instantiate_perturbed(Family f, std::uint64_t seed, double scale) {
  GateSetModel m = instantiate_ideal(f);
  m.seed = seed;
  m.description = "perturbed";
  GaussStream gs(seed);
  for (int i = 0; i < m.theta.size(); ++i) m.theta(i) += scale * gs.gauss();
  return m;
}

GateSetModel instantiate_noisy(Family f, std::uint64_t seed,
                               double coherent_scale,
                               double stochastic_scale) {
  GateSetModel m = instantiate_ideal(f);
  m.seed = seed;
  m.description = "noisy";
  GaussStream gs(seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  const char* names[3] = {"Gi", "Gxpi2", "Gypi2"};
  auto draw = [&](int k) {
    RVec h(k), s(k);
    for (int i = 0; i < k; ++i) h(i) = coherent_scale * gs.gauss();
    for (int i = 0; i < k; ++i) s(i) = stochastic_scale * gs.uniform();
    return std::make_pair(h, s);
  };
  // Noisy but strictly interior SPAM: a shrunk Bloch vector and an effect
  // pulled off both eigenvalue bounds, so that a fit to this model is never
  // pinned against the physicality constraints by the truth itself.
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Vec4 rho4[2], eff4[2][2];
  for (int q = 0; q < 2; ++q) {
    double dr = stochastic_scale * (0.5 + gs.uniform());
    double d0 = stochastic_scale * (0.5 + gs.uniform());
    double d1 = stochastic_scale * (0.5 + gs.uniform());
    rho4[q] << inv_sqrt2, 0.0, 0.0, inv_sqrt2 * (1.0 - dr);
    // E0 = (1 - d0)|0><0| + d1|1><1|
    eff4[q][0] << inv_sqrt2 * (1.0 - d0 + d1), 0.0, 0.0,
        inv_sqrt2 * (1.0 - d0 - d1);
    eff4[q][1] = identity_vec4() - eff4[q][0];
  }
  if (f == Family::General) {
    Channels ch = m.channels();
    for (int g0 = 0; g0 < 3; ++g0)
      for (int g1 = 0; g1 < 3; ++g1) {
        auto [h, s] = draw(15);
        std::string label = std::string(names[g0]) + ":" + names[g1];
        ch.layer[3 * g0 + g1] =
            build_gate(label, HamiltonianCoeffs{h, {}}, StochasticCoeffs{s, {}})
                .m;
      }
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        ch.rho(4 * i + j) = rho4[0](i) * rho4[1](j);
    for (int b0 = 0; b0 < 2; ++b0)
      for (int b1 = 0; b1 < 2; ++b1)
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j)
            ch.effect[2 * b0 + b1](4 * i + j) =
                eff4[0][b0](i) * eff4[1][b1](j);
    GateSetModel out = general_from_channels(ch);
    out.seed = seed;
    out.description = m.description;
    return out;
  }
  const bool cd = f == Family::ContextDependent;
  for (int q = 0; q < 2; ++q) {
    for (int g = 0; g < 3; ++g)
      for (int c = 0; c < (cd ? 3 : 1); ++c) {
        auto [h, s] = draw(3);
        Mat4 ptm = build_gate(names[g], HamiltonianCoeffs{h, {}},
                              StochasticCoeffs{s, {}})
                       .m;
        gate_ptm_to_block(ptm, m.theta,
                          cd ? cd_gate_off(q, g, c) : cf_gate_off(q, g));
      }
    int so = (cd ? kCdSpam : kCfSpam) + q * 7;
    m.theta.segment<3>(so) = rho4[q].tail<3>();
    m.theta.segment<4>(so + 3) = eff4[q][0];
  }
  return m;
}

GateSetModel embed(const GateSetModel& m, Family larger) {
  if (!family_nested_in(m.family, larger))
    throw ValidationError("embed: target family is not strictly larger");
  if (larger == Family::ContextDependent) {
    GateSetModel out;
    out.family = larger;
    out.theta = Eigen::VectorXd::Zero(n_params(larger));
    out.description = m.description;
    for (int q = 0; q < 2; ++q) {
      for (int g = 0; g < 3; ++g)
        for (int c = 0; c < 3; ++c)
          out.theta.segment(cd_gate_off(q, g, c), 12) =
              m.theta.segment(cf_gate_off(q, g), 12);
      out.theta.segment(kCdSpam + q * 7, 7) = m.theta.segment(kCfSpam + q * 7, 7);
    }
    return out;
  }
  GateSetModel out = general_from_channels(m.channels());
  out.description = m.description;
  return out;
}

GateSetModel general_from_channels(const Channels& ch) {
  GateSetModel m;
  m.family = Family::General;
  m.theta = Eigen::VectorXd::Zero(n_params(Family::General));
  for (int l = 0; l < 9; ++l) {
    int off = l * 240;
    for (int r = 0; r < 15; ++r)
      for (int c = 0; c < 16; ++c) m.theta(off + 16 * r + c) = ch.layer[l](r + 1, c);
  }
  for (int i = 0; i < 15; ++i) m.theta(kGenRho + i) = ch.rho(i + 1);
  for (int e = 0; e < 3; ++e)
    for (int i = 0; i < 16; ++i) m.theta(kGenEff + e * 16 + i) = ch.effect[e](i);
  return m;
}

void accumulate_theta_grad(const GateSetModel& m, const ChannelsAdjoint& adj,
                           Eigen::VectorXd& grad) {
  if (grad.size() != m.theta.size())
    throw ValidationError("accumulate_theta_grad: gradient size mismatch");
  if (m.family == Family::General) {
    for (int l = 0; l < 9; ++l) {
      int off = l * 240;
      for (int r = 0; r < 15; ++r)
        for (int c = 0; c < 16; ++c) grad(off + 16 * r + c) += adj.layer[l](r + 1, c);
    }
    for (int i = 0; i < 15; ++i) grad(kGenRho + i) += adj.rho(i + 1);
    // effect3 = identity - (e0 + e1 + e2)
    for (int e = 0; e < 3; ++e)
      for (int i = 0; i < 16; ++i)
        grad(kGenEff + e * 16 + i) += adj.effect[e](i) - adj.effect[3](i);
    return;
  }
  Factored f = unpack_factored(m);
  const bool cd = m.family == Family::ContextDependent;
  const int spam_base = cd ? kCdSpam : kCfSpam;
  // Layer adjoints -> tensor factors.
  for (int g0 = 0; g0 < 3; ++g0)
    for (int g1 = 0; g1 < 3; ++g1) {
      const Mat16& al = adj.layer[3 * g0 + g1];
      const Mat4& a = f.gate[0][g0][cd ? g1 : 0];
      const Mat4& b = f.gate[1][g1][cd ? g0 : 0];
      Mat4 da = Mat4::Zero(), db = Mat4::Zero();
      for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k) {
          const auto blk = al.block<4, 4>(4 * i, 4 * k);
          da(i, k) = (blk.cwiseProduct(b)).sum();
          db += a(i, k) * blk;
        }
      int off_a = cd ? cd_gate_off(0, g0, g1) : cf_gate_off(0, g0);
      int off_b = cd ? cd_gate_off(1, g1, g0) : cf_gate_off(1, g1);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) {
          grad(off_a + 4 * r + c) += da(r + 1, c);
          grad(off_b + 4 * r + c) += db(r + 1, c);
        }
    }
  // State adjoint.
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double g = adj.rho(4 * i + j);
      if (i >= 1) grad(spam_base + 0 + (i - 1)) += g * f.rho[1](j);
      if (j >= 1) grad(spam_base + 7 + (j - 1)) += g * f.rho[0](i);
    }
  // Effect adjoints through e1 = id - e0 on each qubit.
  for (int b0 = 0; b0 < 2; ++b0)
    for (int b1 = 0; b1 < 2; ++b1) {
      const Vec16& ae = adj.effect[2 * b0 + b1];
      const double s0 = (b0 == 0) ? 1.0 : -1.0;
      const double s1 = (b1 == 0) ? 1.0 : -1.0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          double g = ae(4 * i + j);
          grad(spam_base + 3 + i) += s0 * g * f.eff[1][b1](j);
          grad(spam_base + 7 + 3 + j) += s1 * g * f.eff[0][b0](i);
        }
    }
}

std::string model_to_json(const GateSetModel& m) {
  json j;
  j["family"] = family_name(m.family);
  j["theta"] = std::vector<double>(m.theta.data(), m.theta.data() + m.theta.size());
  j["metadata"] = {{"seed", m.seed}, {"description", m.description}};
  return j.dump(2);
}

GateSetModel model_from_json_text(const std::string& text) {
  json j = json::parse(text);
  GateSetModel m;
  m.family = family_from_name(j.at("family").get<std::string>());
  auto theta = j.at("theta").get<std::vector<double>>();
  if (static_cast<int>(theta.size()) != n_params(m.family))
    throw ValidationError("model JSON: theta length mismatch");
  m.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(),
                                              static_cast<long>(theta.size()));
  if (j.contains("metadata")) {
    const auto& md = j["metadata"];
    if (md.contains("seed")) m.seed = md["seed"].get<std::uint64_t>();
    if (md.contains("description")) m.description = md["description"];
  }
  return m;
}

void write_model(const GateSetModel& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << model_to_json(m) << '\n';
}

GateSetModel read_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return model_from_json_text(ss.str());
}

namespace {

void apply_coeff_obj(const json& obj, RVec& h, RVec& s) {
  const auto& labels = pauli_labels(2);
  auto index_of = [&labels](const std::string& lbl) {
    for (size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == lbl) return static_cast<int>(i);
    throw ValidationError("unknown Pauli label in noise model: " + lbl);
  };
  if (obj.contains("ham"))
    for (auto it = obj["ham"].begin(); it != obj["ham"].end(); ++it)
      h(index_of(it.key())) += it.value().get<double>();
  if (obj.contains("sto"))
    for (auto it = obj["sto"].begin(); it != obj["sto"].end(); ++it)
      s(index_of(it.key())) += it.value().get<double>();
}

}  // namespace

GateSetModel errorgen_model_from_json_text(const std::string& text) {
  json j = json::parse(text);
  if (j.value("format", "") != "xtalk-errorgen-model")
    throw ValidationError("not an xtalk-errorgen-model JSON");
  GateSetModel ideal = instantiate_ideal(Family::General);
  Channels ch = ideal.channels();
  for (int g0 = 0; g0 < 3; ++g0)
    for (int g1 = 0; g1 < 3; ++g1) {
      Layer l{static_cast<Gate>(g0), static_cast<Gate>(g1)};
      std::string label = layer_label(l);
      RVec h = RVec::Zero(15), s = RVec::Zero(15);
      if (j.contains("all_layers")) apply_coeff_obj(j["all_layers"], h, s);
      if (j.contains("layers") && j["layers"].contains(label))
        apply_coeff_obj(j["layers"][label], h, s);
      ProcessMatrix g =
          build_gate(label, HamiltonianCoeffs{h, {}}, StochasticCoeffs{s, {}});
      ch.layer[l.index()] = g.m;
    }
  GateSetModel m = general_from_channels(ch);
  m.description = j.value("description", "errorgen model");
  return m;
}

GateSetModel read_any_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  json j = json::parse(ss.str());
  if (j.value("format", "") == "xtalk-errorgen-model")
    return errorgen_model_from_json_text(ss.str());
  return model_from_json_text(ss.str());
}

}  // namespace xtalk
