#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "xtalk/errorgen.hpp"
#include "xtalk/superop.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

using namespace xtalk;

TEST_CASE("pauli label order matches index 4i+j") {
  const auto& l1 = pauli_labels(1);
  REQUIRE(l1.size() == 3);
  CHECK(l1[0] == "X");
  CHECK(l1[2] == "Z");
  const auto& l2 = pauli_labels(2);
  REQUIRE(l2.size() == 15);
  CHECK(l2[0] == "IX");
  CHECK(l2[3] == "XI");
  CHECK(l2[14] == "ZZ");
}

TEST_CASE("hamiltonian generator exponentiates to the rotation channel") {
  // exp(theta * H_X) should equal the PTM of exp(-i theta X / 2)... with the
  // convention rho -> -i[P, rho], exp(t * H_P) = channel of exp(-i t P).
  double t = 0.37;
  RMat gen = hamiltonian_generator("X", 1);
  CHECK((gen + gen.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  ProcessMatrix lhs = expm(t * gen);
  CMat u = (Cplx(0, -t) * pauli_matrices()[1]).exp();
  ProcessMatrix rhs = ptm_from_unitary(u);
  CHECK((lhs.m - rhs.m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stochastic generator gives the pauli dephasing channel") {
  // exp(s * S_Z) on one qubit: X,Y components damp by exp(-2s).
  double s = 0.23;
  ProcessMatrix g = expm(s * stochastic_generator("Z", 1));
  RMat expect = RMat::Identity(4, 4);
  expect(1, 1) = expect(2, 2) = std::exp(-2 * s);
  CHECK((g.m - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(is_cptp(g));
}

TEST_CASE("two-qubit generators act in the full 16-dim basis") {
  RMat gzz = hamiltonian_generator("ZZ", 2);
  CHECK(gzz.rows() == 16);
  CHECK((gzz + gzz.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  // ZZ commutes with Z x I, so the generator must annihilate that direction.
  RVec ezi = RVec::Zero(16);
  ezi(12) = 1.0;  // index 4*3 + 0
  CHECK((gzz * ezi).cwiseAbs().maxCoeff() < 1e-14);
  // but rotates X x I toward Y x Z
  RVec exi = RVec::Zero(16);
  exi(4) = 1.0;
  CHECK((gzz * exi).cwiseAbs().maxCoeff() > 0.5);
}

TEST_CASE("ideal hamiltonians are quarter rotations") {
  RVec hx = ideal_hamiltonian("Gxpi2");
  REQUIRE(hx.size() == 3);
  CHECK(hx(0) == doctest::Approx(M_PI / 4));
  CHECK(hx(1) == 0.0);
  RVec layer = ideal_hamiltonian("Gxpi2:Gypi2");
  REQUIRE(layer.size() == 15);
  CHECK(layer(3) == doctest::Approx(M_PI / 4));   // X on qubit 0
  CHECK(layer(1) == doctest::Approx(M_PI / 4));   // Y on qubit 1
  CHECK(ideal_hamiltonian("Gi:Gi").cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gate label qubit count") {
  CHECK(gate_label_qubits("Gxpi2") == 1);
  CHECK(gate_label_qubits("Gxpi2:Gi") == 2);
}

TEST_CASE("build_gate with zero error reproduces the ideal gate") {
  HamiltonianCoeffs dh{RVec::Zero(3), std::nullopt};
  StochasticCoeffs s{RVec::Zero(3), std::nullopt};
  ProcessMatrix g = build_gate("Gxpi2", dh, s);
  CMat u = (Cplx(0, -M_PI / 4) * pauli_matrices()[1]).exp();
  CHECK((g.m - ptm_from_unitary(u).m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("build_gate rejects negative stochastic rates") {
  HamiltonianCoeffs dh{RVec::Zero(3), std::nullopt};
  RVec bad = RVec::Zero(3);
  bad(1) = -1e-3;
  CHECK_THROWS_AS(build_gate("Gxpi2", dh, StochasticCoeffs{bad, std::nullopt}),
                  ValidationError);
}

TEST_CASE("decompose_gate recovers non-commuting coherent errors exactly") {
  // dH with components that do not commute with the ideal generator: a naive
  // single-log split would be off at first order in the commutator.
  for (const char* target : {"Gxpi2", "Gypi2", "Gi"}) {
    RVec dh = RVec::Zero(3);
    dh << 0.03, -0.02, 0.025;  // norm ~0.044 < 0.05
    RVec s = RVec::Zero(3);
    s << 1e-3, 4e-4, 2e-3;
    ProcessMatrix g = build_gate(target, HamiltonianCoeffs{dh, std::nullopt},
                                 StochasticCoeffs{s, std::nullopt});
    GateDecomposition d = decompose_gate(g, target);
    CHECK((d.dh.h - dh).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((d.s.s - s).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(d.residual < 1e-6);
  }
}

TEST_CASE("decompose_gate handles two-qubit layers with a ZZ term") {
  RVec dh = RVec::Zero(15);
  dh(14) = 2.3e-3;  // ZZ
  dh(3) = -1.2e-3;  // XI
  RVec s = RVec::Zero(15);
  s(0) = 5e-4;
  ProcessMatrix g =
      build_gate("Gxpi2:Gypi2", HamiltonianCoeffs{dh, std::nullopt},
                 StochasticCoeffs{s, std::nullopt});
  GateDecomposition d = decompose_gate(g, "Gxpi2:Gypi2");
  CHECK((d.dh.h - dh).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((d.s.s - s).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(d.residual < 1e-6);
}

TEST_CASE("decomposition residual flags non-pauli-stochastic noise") {
  // Amplitude damping has an error generator outside the span of the
  // Hamiltonian and Pauli-stochastic sectors.
  double gamma = 0.05;
  CMat k0(2, 2), k1(2, 2);
  k0 << 1, 0, 0, std::sqrt(1 - gamma);
  k1 << 0, std::sqrt(gamma), 0, 0;
  const auto& b = pauli_basis(1);
  RMat m(4, 4);
  for (int a = 0; a < 4; ++a)
    for (int c = 0; c < 4; ++c) {
      Cplx v = (b[a].adjoint() * (k0 * b[c] * k0.adjoint() +
                                  k1 * b[c] * k1.adjoint()))
                   .trace();
      m(a, c) = v.real();
    }
  GateDecomposition d = decompose_gate(ProcessMatrix(4, m), "Gi");
  CHECK(d.residual > 1e-3);
}

TEST_CASE("context variation reports milliradians") {
  RVec a = RVec::Zero(3), b = RVec::Zero(3);
  a(0) = 0.021;
  b(0) = 0.001;
  RVec diff = context_variation(HamiltonianCoeffs{a, std::nullopt},
                                HamiltonianCoeffs{b, std::nullopt});
  CHECK(diff(0) == doctest::Approx(20.0));
  CHECK(diff(1) == 0.0);
}

TEST_CASE("commuting error rate picks the gauge-invariant axis") {
  RVec h = RVec::Zero(3);
  h << 3e-3, 4e-3, 1e-3;
  CHECK(commuting_error_rate(HamiltonianCoeffs{h, std::nullopt}, "Gxpi2") ==
        doctest::Approx(3.0));
  CHECK(commuting_error_rate(HamiltonianCoeffs{h, std::nullopt}, "Gypi2") ==
        doctest::Approx(4.0));
  // Idle: full vector norm, sqrt(9+16+1) mrad.
  CHECK(commuting_error_rate(HamiltonianCoeffs{h, std::nullopt}, "Gi") ==
        doctest::Approx(std::sqrt(26.0)));
}
