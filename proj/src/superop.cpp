#include "xtalk/superop.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

namespace xtalk {

namespace {

std::vector<CMat> make_paulis() {
  CMat I = CMat::Identity(2, 2);
  CMat X(2, 2), Y(2, 2), Z(2, 2);
  X << 0, 1, 1, 0;
  Y << 0, Cplx(0, -1), Cplx(0, 1), 0;
  Z << 1, 0, 0, -1;
  return {I, X, Y, Z};
}

std::vector<CMat> make_basis(int n_qubits) {
  const auto& p = pauli_matrices();
  std::vector<CMat> basis;
  if (n_qubits == 1) {
    for (const auto& a : p) basis.push_back(a / std::sqrt(2.0));
  } else {
    for (const auto& a : p)
      for (const auto& b : p) {
        CMat ab(4, 4);
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            ab.block(2 * i, 2 * j, 2, 2) = a(i, j) * b;
        basis.push_back(ab / 2.0);
      }
  }
  return basis;
}

}  // namespace

const std::vector<CMat>& pauli_matrices() {
  static const std::vector<CMat> p = make_paulis();
  return p;
}

const std::vector<CMat>& pauli_basis(int n_qubits) {
  if (n_qubits != 1 && n_qubits != 2)
    throw ValidationError("pauli_basis: only 1 or 2 qubits supported");
  static const std::vector<CMat> b1 = make_basis(1);
  static const std::vector<CMat> b2 = make_basis(2);
  return n_qubits == 1 ? b1 : b2;
}

bool ProcessMatrix::is_tp(double tol) const {
  for (int j = 0; j < dim; ++j) {
    double target = (j == 0) ? 1.0 : 0.0;
    if (std::abs(m(0, j) - target) > tol) return false;
  }
  return true;
}

ProcessMatrix ptm_from_unitary(const CMat& u, double tol) {
  const int d = static_cast<int>(u.rows());
  if (u.cols() != d || (d != 2 && d != 4))
    throw ValidationError("ptm_from_unitary: expected 2x2 or 4x4 matrix");
  if ((u.adjoint() * u - CMat::Identity(d, d)).norm() > tol)
    throw ValidationError("ptm_from_unitary: input is not unitary");
  const int nq = (d == 2) ? 1 : 2;
  const auto& basis = pauli_basis(nq);
  const int dim = d * d;
  RMat m(dim, dim);
  for (int a = 0; a < dim; ++a) {
    CMat lhs = basis[a] * u;
    for (int b = 0; b < dim; ++b) {
      Cplx val = (lhs * basis[b] * u.adjoint()).trace();
      m(a, b) = val.real();
    }
  }
  return ProcessMatrix(dim, std::move(m));
}

ProcessMatrix compose(const ProcessMatrix& a, const ProcessMatrix& b) {
  if (a.dim != b.dim) throw ValidationError("compose: dimension mismatch");
  return ProcessMatrix(a.dim, b.m * a.m);
}

ProcessMatrix tensor(const ProcessMatrix& a, const ProcessMatrix& b) {
  if (a.dim != 4 || b.dim != 4)
    throw ValidationError("tensor: expected two 1-qubit channels");
  RMat m(16, 16);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k)
      m.block(4 * i, 4 * k, 4, 4) = a.m(i, k) * b.m;
  return ProcessMatrix(16, std::move(m));
}

CMat choi_of(const ProcessMatrix& g) {
  // Choi = (1/d) sum_ab M_ab (B_b^T kron B_a), trace 1 for TP channels.
  const int nq = g.n_qubits();
  const int d = 1 << nq;
  const auto& basis = pauli_basis(nq);
  CMat choi = CMat::Zero(d * d, d * d);
  for (int a = 0; a < g.dim; ++a) {
    CMat ba = basis[a];
    for (int b = 0; b < g.dim; ++b) {
      if (g.m(a, b) == 0.0) continue;
      CMat bbt = basis[b].transpose();
      CMat kron(d * d, d * d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          kron.block(d * i, d * j, d, d) = bbt(i, j) * ba;
      choi += (g.m(a, b) / d) * kron;
    }
  }
  return choi;
}

ProcessMatrix ptm_from_choi(const CMat& choi, int dim) {
  const int nq = (dim == 4) ? 1 : 2;
  const int d = 1 << nq;
  const auto& basis = pauli_basis(nq);
  RMat m(dim, dim);
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b) {
      // Inverse of the expansion in choi_of, using HS orthonormality.
      CMat kron(d * d, d * d);
      CMat bbt = basis[b].transpose();
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          kron.block(d * i, d * j, d, d) = bbt(i, j) * basis[a];
      m(a, b) = d * (kron.adjoint() * choi).trace().real();
    }
  return ProcessMatrix(dim, std::move(m));
}

bool is_cptp(const ProcessMatrix& g, double tol) {
  if (!g.is_tp(tol)) return false;
  CMat choi = choi_of(g);
  Eigen::SelfAdjointEigenSolver<CMat> es(choi);
  return es.eigenvalues().minCoeff() >= -tol;
}

RMat log_near_identity(const ProcessMatrix& g, double tol) {
  Eigen::EigenSolver<RMat> es(g.m);
  for (int i = 0; i < g.dim; ++i) {
    Cplx ev = es.eigenvalues()(i);
    if (ev.real() <= 0.0 && std::abs(ev.imag()) < 1e-8 * (1.0 + std::abs(ev)))
      throw BranchCutError(
          "log_near_identity: eigenvalue on the negative real axis");
  }
  RMat lg = g.m.log();
  if ((lg.exp() - g.m).norm() > tol * (1.0 + g.m.norm()))
    throw BranchCutError("log_near_identity: exp/log round trip failed");
  return lg;
}

ProcessMatrix expm(const RMat& generator) {
  const int dim = static_cast<int>(generator.rows());
  if (generator.cols() != dim || (dim != 4 && dim != 16))
    throw ValidationError("expm: expected 4x4 or 16x16 generator");
  return ProcessMatrix(dim, generator.exp());
}

RVec state_to_pauli_vec(const CMat& rho) {
  const int d = static_cast<int>(rho.rows());
  const int nq = (d == 2) ? 1 : 2;
  const auto& basis = pauli_basis(nq);
  RVec v(d * d);
  for (size_t a = 0; a < basis.size(); ++a)
    v(static_cast<int>(a)) = (basis[a].adjoint() * rho).trace().real();
  return v;
}

CMat pauli_vec_to_operator(const RVec& v) {
  const int dim = static_cast<int>(v.size());
  const int nq = (dim == 4) ? 1 : 2;
  const int d = 1 << nq;
  const auto& basis = pauli_basis(nq);
  CMat op = CMat::Zero(d, d);
  for (size_t a = 0; a < basis.size(); ++a) op += v(static_cast<int>(a)) * basis[a];
  return op;
}

StateVec ideal_state(int n_qubits) {
  const int d = 1 << n_qubits;
  CMat rho = CMat::Zero(d, d);
  rho(0, 0) = 1.0;
  return StateVec{d * d, state_to_pauli_vec(rho)};
}

Povm computational_povm(int n_qubits) {
  const int d = 1 << n_qubits;
  Povm povm;
  for (int b = 0; b < d; ++b) {
    CMat e = CMat::Zero(d, d);
    e(b, b) = 1.0;
    std::string label;
    for (int q = 0; q < n_qubits; ++q)
      label.push_back(((b >> (n_qubits - 1 - q)) & 1) ? '1' : '0');
    povm.labels.push_back(label);
    povm.effects.push_back(state_to_pauli_vec(e));
  }
  return povm;
}

RVec identity_effect_vec(int n_qubits) {
  const int d = 1 << n_qubits;
  return state_to_pauli_vec(CMat::Identity(d, d));
}

}  // namespace xtalk
