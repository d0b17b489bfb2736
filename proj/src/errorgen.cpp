#include "xtalk/errorgen.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>

namespace xtalk {

namespace {

const char kPauliChars[4] = {'I', 'X', 'Y', 'Z'};

CMat pauli_from_label(const std::string& label) {
  const auto& p = pauli_matrices();
  if (label.size() == 1) {
    for (int i = 0; i < 4; ++i)
      if (label[0] == kPauliChars[i]) return p[i];
    throw ValidationError("unknown Pauli label: " + label);
  }
  if (label.size() == 2) {
    int i = -1, j = -1;
    for (int k = 0; k < 4; ++k) {
      if (label[0] == kPauliChars[k]) i = k;
      if (label[1] == kPauliChars[k]) j = k;
    }
    if (i < 0 || j < 0) throw ValidationError("unknown Pauli label: " + label);
    CMat ab(4, 4);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) ab.block(2 * r, 2 * c, 2, 2) = p[i](r, c) * p[j];
    return ab;
  }
  throw ValidationError("unknown Pauli label: " + label);
}

RMat superop_in_basis(int n_qubits,
                      const std::function<CMat(const CMat&)>& action) {
  const auto& basis = pauli_basis(n_qubits);
  const int dim = static_cast<int>(basis.size());
  RMat m(dim, dim);
  for (int b = 0; b < dim; ++b) {
    CMat out = action(basis[b]);
    for (int a = 0; a < dim; ++a)
      m(a, b) = (basis[a].adjoint() * out).trace().real();
  }
  return m;
}

struct GeneratorBasis {
  std::vector<RMat> ham;  // ordered as pauli_labels(n)
  std::vector<RMat> sto;
  double ham_norm2;  // HS norm^2 of each basis element (uniform per set)
  double sto_norm2;
};

const GeneratorBasis& generator_basis(int n_qubits) {
  static GeneratorBasis cache[2];
  GeneratorBasis& gb = cache[n_qubits - 1];
  if (gb.ham.empty()) {
    for (const auto& lbl : pauli_labels(n_qubits)) {
      gb.ham.push_back(hamiltonian_generator(lbl, n_qubits));
      gb.sto.push_back(stochastic_generator(lbl, n_qubits));
    }
    gb.ham_norm2 = gb.ham[0].squaredNorm();
    gb.sto_norm2 = gb.sto[0].squaredNorm();
  }
  return gb;
}

}  // namespace

const std::vector<std::string>& pauli_labels(int n_qubits) {
  static std::vector<std::string> one = {"X", "Y", "Z"};
  static std::vector<std::string> two = [] {
    std::vector<std::string> v;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        if (i == 0 && j == 0) continue;
        v.push_back(std::string() + kPauliChars[i] + kPauliChars[j]);
      }
    return v;
  }();
  if (n_qubits == 1) return one;
  if (n_qubits == 2) return two;
  throw ValidationError("pauli_labels: only 1 or 2 qubits");
}

RMat hamiltonian_generator(const std::string& pauli, int n_qubits) {
  if (pauli == "I" || pauli == "II")
    throw ValidationError("hamiltonian_generator: identity generates nothing");
  CMat p = pauli_from_label(pauli);
  const Cplx mi(0, -1);
  return superop_in_basis(n_qubits,
                          [&](const CMat& b) { return mi * (p * b - b * p); });
}

RMat stochastic_generator(const std::string& pauli, int n_qubits) {
  if (pauli == "I" || pauli == "II")
    throw ValidationError("stochastic_generator: identity generates nothing");
  CMat p = pauli_from_label(pauli);
  return superop_in_basis(n_qubits,
                          [&](const CMat& b) { return p * b * p - b; });
}

int gate_label_qubits(const std::string& target) {
  return target.find(':') == std::string::npos ? 1 : 2;
}

namespace {

double gate_h_component(const std::string& gate, const std::string& axis) {
  if (gate == "Gi") return 0.0;
  if (gate == "Gxpi2") return axis == "X" ? M_PI / 4 : 0.0;
  if (gate == "Gypi2") return axis == "Y" ? M_PI / 4 : 0.0;
  throw ValidationError("unknown gate label: " + gate);
}

}  // namespace

RVec ideal_hamiltonian(const std::string& target) {
  const int nq = gate_label_qubits(target);
  const auto& labels = pauli_labels(nq);
  RVec h = RVec::Zero(static_cast<int>(labels.size()));
  if (nq == 1) {
    for (size_t i = 0; i < labels.size(); ++i)
      h(static_cast<int>(i)) = gate_h_component(target, labels[i]);
  } else {
    auto colon = target.find(':');
    std::string g0 = target.substr(0, colon), g1 = target.substr(colon + 1);
    for (size_t i = 0; i < labels.size(); ++i) {
      const std::string& lbl = labels[i];
      // Single-qubit targets embed as P (x) I and I (x) P.
      if (lbl[1] == 'I')
        h(static_cast<int>(i)) = gate_h_component(g0, std::string(1, lbl[0]));
      else if (lbl[0] == 'I')
        h(static_cast<int>(i)) = gate_h_component(g1, std::string(1, lbl[1]));
    }
  }
  return h;
}

namespace {

RMat ham_matrix(const RVec& h, int nq) {
  const auto& gb = generator_basis(nq);
  RMat m = RMat::Zero(gb.ham[0].rows(), gb.ham[0].cols());
  for (int i = 0; i < h.size(); ++i)
    if (h(i) != 0.0) m += h(i) * gb.ham[static_cast<size_t>(i)];
  return m;
}

RMat sto_matrix(const RVec& s, int nq) {
  const auto& gb = generator_basis(nq);
  RMat m = RMat::Zero(gb.sto[0].rows(), gb.sto[0].cols());
  for (int i = 0; i < s.size(); ++i)
    if (s(i) != 0.0) m += s(i) * gb.sto[static_cast<size_t>(i)];
  return m;
}

}  // namespace

ProcessMatrix build_gate(const std::string& target, const HamiltonianCoeffs& dh,
                         const StochasticCoeffs& s) {
  const int nq = gate_label_qubits(target);
  const int k = static_cast<int>(pauli_labels(nq).size());
  if (dh.h.size() != k || s.s.size() != k)
    throw ValidationError("build_gate: coefficient vector size mismatch");
  if (s.s.minCoeff() < 0.0)
    throw ValidationError("build_gate: negative stochastic rate");
  RVec h = ideal_hamiltonian(target) + dh.h;
  RMat u = ham_matrix(h, nq).exp();
  RMat l = sto_matrix(s.s, nq).exp();
  return ProcessMatrix(static_cast<int>(u.rows()), l * u);
}

namespace {

// Hamiltonian-sector components of log(g * exp(-(H0 + dh))). The Hamiltonian
// generators are mutually orthogonal and orthogonal to the (symmetric)
// stochastic generators, so a plain projection is exact.
RVec ham_residual(const ProcessMatrix& g, const RVec& h0, const RVec& dh,
                  int nq) {
  const auto& gb = generator_basis(nq);
  const int k = static_cast<int>(gb.ham.size());
  RMat u_inv = (-ham_matrix(h0 + dh, nq)).exp();
  RMat l = log_near_identity(ProcessMatrix(g.dim, g.m * u_inv));
  RVec r(k);
  for (int i = 0; i < k; ++i)
    r(i) = (l.cwiseProduct(gb.ham[static_cast<size_t>(i)])).sum() /
           gb.ham_norm2;
  return r;
}

}  // namespace

GateDecomposition decompose_gate(const ProcessMatrix& g,
                                 const std::string& target) {
  const int nq = gate_label_qubits(target);
  const auto& gb = generator_basis(nq);
  const int k = static_cast<int>(gb.ham.size());
  const RVec h0 = ideal_hamiltonian(target);

  // Solve for dh such that log(g * exp(-(H0 + dh))) has no Hamiltonian
  // component, by Newton iteration with a finite-difference Jacobian. The
  // simpler contraction dh += residual diverges for two-qubit layers, where
  // the quarter-turn adjoint amplifies off-axis components.
  RVec dh = RVec::Zero(k);
  const double fd = 1e-7;
  for (int iter = 0; iter < 50; ++iter) {
    RVec f = ham_residual(g, h0, dh, nq);
    if (f.norm() < 1e-13) break;
    RMat jac(k, k);
    for (int j = 0; j < k; ++j) {
      RVec dhp = dh;
      dhp(j) += fd;
      jac.col(j) = (ham_residual(g, h0, dhp, nq) - f) / fd;
    }
    dh -= jac.partialPivLu().solve(f);
  }
  RMat u_inv = (-ham_matrix(h0 + dh, nq)).exp();
  RMat l = log_near_identity(ProcessMatrix(g.dim, g.m * u_inv));

  GateDecomposition out;
  out.dh.h = dh;
  // The stochastic generators overlap each other (all share a trace part),
  // so the coefficients come from the Gram system rather than projections.
  RMat gram(k, k);
  RVec rhs(k);
  for (int i = 0; i < k; ++i) {
    rhs(i) = (l.cwiseProduct(gb.sto[static_cast<size_t>(i)])).sum();
    for (int j = i; j < k; ++j) {
      gram(i, j) = gram(j, i) =
          (gb.sto[static_cast<size_t>(i)]
               .cwiseProduct(gb.sto[static_cast<size_t>(j)]))
              .sum();
    }
  }
  out.s.s = gram.ldlt().solve(rhs);
  RMat remainder = l;
  for (int i = 0; i < k; ++i) {
    double hc = (l.cwiseProduct(gb.ham[static_cast<size_t>(i)])).sum() /
                gb.ham_norm2;
    remainder -= hc * gb.ham[static_cast<size_t>(i)] +
                 out.s.s(i) * gb.sto[static_cast<size_t>(i)];
  }
  out.residual = remainder.norm();
  return out;
}

RVec context_variation(const HamiltonianCoeffs& a, const HamiltonianCoeffs& b) {
  if (a.h.size() != b.h.size())
    throw ValidationError("context_variation: size mismatch");
  return (a.h - b.h) * 1e3;
}

double commuting_error_rate(const HamiltonianCoeffs& dh,
                            const std::string& target) {
  const int nq = gate_label_qubits(target);
  const auto& labels = pauli_labels(nq);
  if (target == "Gi" || target == "Gi:Gi") return dh.h.norm() * 1e3;
  if (nq == 1) {
    std::string axis = target == "Gxpi2" ? "X"
                       : target == "Gypi2"
                           ? "Y"
                           : throw ValidationError("unknown target: " + target);
    for (size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == axis) return dh.h(static_cast<int>(i)) * 1e3;
  }
  throw ValidationError("commuting_error_rate: unsupported target " + target);
}

}  // namespace xtalk
