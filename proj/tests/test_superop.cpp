#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "xtalk/superop.hpp"

#include <cmath>

using namespace xtalk;

namespace {

CMat rotation(const CMat& pauli, double angle) {
  CMat id = CMat::Identity(pauli.rows(), pauli.cols());
  return std::cos(angle / 2) * id -
         Cplx(0, 1) * std::sin(angle / 2) * pauli;
}

}  // namespace

TEST_CASE("pauli basis is Hilbert-Schmidt orthonormal") {
  for (int n : {1, 2}) {
    const auto& b = pauli_basis(n);
    REQUIRE(b.size() == (n == 1 ? 4u : 16u));
    for (std::size_t i = 0; i < b.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) {
        Cplx ip = (b[i].adjoint() * b[j]).trace();
        CHECK(std::abs(ip - (i == j ? 1.0 : 0.0)) < 1e-14);
      }
  }
}

TEST_CASE("two-qubit basis index 4i+j puts qubit 0 on the left") {
  const auto& b1 = pauli_basis(1);
  const auto& b2 = pauli_basis(2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      CMat kron(4, 4);
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
          kron.block(2 * r, 2 * c, 2, 2) = b1[i](r, c) * b1[j];
      CHECK((b2[4 * i + j] - kron).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("x pi/2 transfer matrix maps Y to Z and Z to -Y") {
  CMat u = rotation(pauli_matrices()[1], M_PI / 2);
  ProcessMatrix g = ptm_from_unitary(u);
  RMat expect(4, 4);
  expect << 1, 0, 0, 0,
            0, 1, 0, 0,
            0, 0, 0, -1,
            0, 0, 1, 0;
  CHECK((g.m - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("four quarter turns compose to the identity") {
  ProcessMatrix g = ptm_from_unitary(rotation(pauli_matrices()[1], M_PI / 2));
  ProcessMatrix acc = ProcessMatrix::identity(4);
  for (int k = 0; k < 4; ++k) acc = compose(acc, g);
  CHECK((acc.m - RMat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("compose order: a acts first") {
  ProcessMatrix x = ptm_from_unitary(rotation(pauli_matrices()[1], M_PI / 2));
  ProcessMatrix y = ptm_from_unitary(rotation(pauli_matrices()[2], M_PI / 2));
  ProcessMatrix xy = compose(x, y);
  CHECK((xy.m - y.m * x.m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tensor of unitary channels equals channel of the kron") {
  CMat ux = rotation(pauli_matrices()[1], M_PI / 2);
  CMat uy = rotation(pauli_matrices()[2], M_PI / 2);
  CMat kron(4, 4);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      kron.block(2 * r, 2 * c, 2, 2) = ux(r, c) * uy;
  ProcessMatrix lhs = tensor(ptm_from_unitary(ux), ptm_from_unitary(uy));
  ProcessMatrix rhs = ptm_from_unitary(kron);
  CHECK((lhs.m - rhs.m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ptm_from_unitary rejects non-unitary input") {
  CMat a = CMat::Identity(2, 2);
  a(0, 0) = 2.0;
  CHECK_THROWS_AS(ptm_from_unitary(a), ValidationError);
}

TEST_CASE("choi transform round trips and normalizes trace") {
  ProcessMatrix g = ptm_from_unitary(rotation(pauli_matrices()[2], 0.7));
  CMat j = choi_of(g);
  CHECK(std::abs(j.trace() - Cplx(1, 0)) < 1e-12);
  ProcessMatrix back = ptm_from_choi(j, 4);
  CHECK((back.m - g.m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("choi of the completely depolarizing channel is maximally mixed") {
  RMat m = RMat::Zero(4, 4);
  m(0, 0) = 1.0;
  CMat j = choi_of(ProcessMatrix(4, m));
  CHECK((j - CMat::Identity(4, 4) / 4.0).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("cptp check accepts unitaries and rejects the transpose map") {
  ProcessMatrix g = ptm_from_unitary(rotation(pauli_matrices()[1], 1.1));
  CHECK(is_cptp(g));
  RMat t = RMat::Identity(4, 4);
  t(2, 2) = -1.0;  // transpose map: Y -> -Y, positive but not completely so
  CHECK(!is_cptp(ProcessMatrix(4, t)));
  RMat ntp = RMat::Identity(4, 4);
  ntp(0, 1) = 0.1;  // first row must stay (1,0,0,0) for trace preservation
  CHECK(!is_cptp(ProcessMatrix(4, ntp)));
}

TEST_CASE("matrix log inverts exp near the identity") {
  RMat gen = RMat::Zero(4, 4);
  gen(2, 3) = -0.3;
  gen(3, 2) = 0.3;  // small X rotation generator
  gen(1, 1) = -0.05;
  gen(2, 2) = -0.05;  // plus some damping
  ProcessMatrix g = expm(gen);
  RMat back = log_near_identity(g);
  CHECK((back - gen).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("log of a pi rotation hits the branch cut") {
  ProcessMatrix g = ptm_from_unitary(rotation(pauli_matrices()[1], M_PI));
  CHECK_THROWS_AS(log_near_identity(g), BranchCutError);
}

TEST_CASE("ideal state and computational readout give deterministic 00") {
  StateVec rho = ideal_state(2);
  Povm povm = computational_povm(2);
  REQUIRE(povm.labels.size() == 4);
  CHECK(povm.labels[0] == "00");
  CHECK(povm.labels[1] == "01");
  CHECK(povm.labels[2] == "10");
  CHECK(povm.labels[3] == "11");
  for (int k = 0; k < 4; ++k) {
    double p = povm.effects[k].dot(rho.v);
    CHECK(std::abs(p - (k == 0 ? 1.0 : 0.0)) < 1e-14);
  }
}

TEST_CASE("outcome label bit order follows the tensor order") {
  // Flip qubit 1 only: |00> -> |01>, so outcome "01" must fire.
  CMat x = pauli_matrices()[1];
  ProcessMatrix flip1 = tensor(ProcessMatrix::identity(4), ptm_from_unitary(x));
  StateVec rho = ideal_state(2);
  RVec out = flip1.m * rho.v;
  Povm povm = computational_povm(2);
  CHECK(std::abs(povm.effects[1].dot(out) - 1.0) < 1e-12);
  CHECK(std::abs(povm.effects[2].dot(out)) < 1e-12);
}

TEST_CASE("povm effects sum to the identity effect") {
  for (int n : {1, 2}) {
    Povm povm = computational_povm(n);
    RVec sum = RVec::Zero(povm.effects[0].size());
    for (const auto& e : povm.effects) sum += e;
    CHECK((sum - identity_effect_vec(n)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("state/operator pauli expansion round trips") {
  CMat rho(2, 2);
  rho << Cplx(0.7, 0), Cplx(0.1, -0.2), Cplx(0.1, 0.2), Cplx(0.3, 0);
  RVec v = state_to_pauli_vec(rho);
  CHECK((pauli_vec_to_operator(v) - rho).cwiseAbs().maxCoeff() < 1e-14);
}
