#ifndef XTALK_ERRORGEN_HPP
#define XTALK_ERRORGEN_HPP

#include "xtalk/superop.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

// Error-generator construction and decomposition: noisy gates are built as
// G = exp(L) after exp(H + dH), where H generates the ideal unitary, dH is a
// Hamiltonian (coherent) error generator and L holds the non-unitary part.
// Coefficients are stored in radians; reports render milliradians.

namespace xtalk {

// Non-identity Pauli labels: {"X","Y","Z"} or the 15 two-qubit strings
// "IX","IY",...,"ZZ" ordered by index 4*i + j, identity excluded.
const std::vector<std::string>& pauli_labels(int n_qubits);

// Superoperator of rho -> -i [P, rho]; antisymmetric in the Pauli basis.
RMat hamiltonian_generator(const std::string& pauli, int n_qubits);

// Superoperator of rho -> P rho P - rho; exp(s*gen) is CPTP for s >= 0.
RMat stochastic_generator(const std::string& pauli, int n_qubits);

struct HamiltonianCoeffs {
  RVec h;  // 3 entries (1 qubit) or 15 (2 qubits), radians
  std::optional<RVec> half_widths;
};

struct StochasticCoeffs {
  RVec s;  // nonnegative Pauli-stochastic rates
  std::optional<RVec> half_widths;
};

// Gate labels: "Gi", "Gxpi2", "Gypi2" for one qubit, or "<g0>:<g1>" for a
// two-qubit layer (e.g. "Gxpi2:Gi").
int gate_label_qubits(const std::string& target);

// Hamiltonian coefficient vector of the ideal target (e.g. h_X = pi/4 for
// Gxpi2; a layer combines both single-qubit targets).
RVec ideal_hamiltonian(const std::string& target);

ProcessMatrix build_gate(const std::string& target, const HamiltonianCoeffs& dh,
                         const StochasticCoeffs& s);

struct GateDecomposition {
  HamiltonianCoeffs dh;
  StochasticCoeffs s;
  double residual = 0.0;  // norm of the non-Hamiltonian, non-Pauli-stochastic
                          // sector of the error generator
};

// Exact inversion of the build_gate factorization: solves
// g = exp(L) . exp(H + dH) for dH (Hamiltonian sector) by fixed-point
// iteration, then projects L onto the Pauli-stochastic sector.
GateDecomposition decompose_gate(const ProcessMatrix& g,
                                 const std::string& target);

// Component-wise difference a - b in milliradians; gauge offsets cancel.
RVec context_variation(const HamiltonianCoeffs& a, const HamiltonianCoeffs& b);

// The gauge-invariant commuting-sector rate, in milliradians. For Gxpi2 this
// is dh_X, for Gypi2 dh_Y; for the idle the whole dH is gauge-invariant and
// the norm of the vector is returned.
double commuting_error_rate(const HamiltonianCoeffs& dh,
                            const std::string& target);

struct GateErrorReport {
  std::string gate;
  std::string context;
  HamiltonianCoeffs hamiltonian;
  StochasticCoeffs stochastic;
  std::string gauge_note;
};

}  // namespace xtalk

#endif
