#ifndef XTALK_SUPEROP_HPP
#define XTALK_SUPEROP_HPP

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

// Dense superoperator algebra for 1- and 2-qubit channels, represented as
// real matrices in the normalized Pauli basis {I,X,Y,Z}/sqrt(2) per qubit.
// Qubit 0 is the left tensor factor and the left character of outcome
// strings. compose(a,b) means "a acts first, then b".

namespace xtalk {

using Cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct BranchCutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Normalized Pauli basis for n qubits (n = 1 or 2), Hilbert-Schmidt
// orthonormal. Two-qubit index a = 4*i + j with i the qubit-0 Pauli.
const std::vector<CMat>& pauli_basis(int n_qubits);

// Unnormalized single Pauli matrices I,X,Y,Z.
const std::vector<CMat>& pauli_matrices();

struct ProcessMatrix {
  int dim = 0;  // 4 for one qubit, 16 for two
  RMat m;

  ProcessMatrix() = default;
  ProcessMatrix(int d, RMat mat) : dim(d), m(std::move(mat)) {
    if (m.rows() != dim || m.cols() != dim)
      throw ValidationError("ProcessMatrix: shape mismatch");
  }

  static ProcessMatrix identity(int dim) {
    return ProcessMatrix(dim, RMat::Identity(dim, dim));
  }

  int n_qubits() const { return dim == 4 ? 1 : 2; }
  bool is_tp(double tol = 1e-12) const;
};

struct StateVec {
  int dim = 0;
  RVec v;  // density operator expanded in the normalized Pauli basis
};

struct Povm {
  std::vector<std::string> labels;
  std::vector<RVec> effects;
};

// Superoperator of rho -> u rho u^dag. Throws if u is not unitary.
ProcessMatrix ptm_from_unitary(const CMat& u, double tol = 1e-10);

// "a then b"; matrix product b.m * a.m.
ProcessMatrix compose(const ProcessMatrix& a, const ProcessMatrix& b);

// Two-qubit channel with qubit 0 the left factor.
ProcessMatrix tensor(const ProcessMatrix& a, const ProcessMatrix& b);

// Choi matrix in the computational basis, trace normalized to 1 for a TP
// channel. Inverse transform recovers the PTM.
CMat choi_of(const ProcessMatrix& g);
ProcessMatrix ptm_from_choi(const CMat& choi, int dim);

bool is_cptp(const ProcessMatrix& g, double tol = 1e-9);

// Principal matrix log; throws BranchCutError when the spectrum touches the
// negative real axis or the round trip fails.
RMat log_near_identity(const ProcessMatrix& g, double tol = 1e-10);
ProcessMatrix expm(const RMat& generator);

// Pauli-basis expansion of operators and states.
RVec state_to_pauli_vec(const CMat& rho);
CMat pauli_vec_to_operator(const RVec& v);

// Ideal |0...0> state and computational-basis POVM. Outcome label order for
// two qubits is "00","01","10","11" (left char = qubit 0).
StateVec ideal_state(int n_qubits);
Povm computational_povm(int n_qubits);

// Pauli-vector of the identity operator (the completeness sum of a POVM).
RVec identity_effect_vec(int n_qubits);

}  // namespace xtalk

#endif
