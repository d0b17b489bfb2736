#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "xtalk/select.hpp"

#include <cmath>
#include <random>

#include <Eigen/Dense>

using namespace xtalk;

namespace {

Dataset hand_dataset(const std::array<std::int64_t, 4>& counts,
                     const std::string& circuit) {
  Dataset ds;
  DatasetRow row;
  row.circuit = circuit;
  row.counts = counts;
  ds.rows.push_back(row);
  return ds;
}

FitResult summary_fit(Family f, double lambda) {
  FitResult r;
  r.model = instantiate_ideal(f);
  r.lambda = lambda;
  return r;
}

double relax_llr(const std::array<double, 4>& counts,
                 const std::array<double, 4>& p) {
  double shots = counts[0] + counts[1] + counts[2] + counts[3];
  double llr = 0.0;
  for (int k = 0; k < 4; ++k)
    if (counts[k] > 0)
      llr += 2.0 * counts[k] * (std::log(counts[k] / shots) - std::log(p[k]));
  return llr;
}

// Mass moved onto under-predicted outcomes; the relevant TVD for the budget.
double tvd4(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  double t = 0.0;
  for (int k = 0; k < 4; ++k) t += std::max(a[k] - b[k], 0.0);
  return t;
}

ProcessMatrix rotation_ptm(double nx, double ny, double nz, double angle) {
  double norm = std::sqrt(nx * nx + ny * ny + nz * nz);
  nx /= norm;
  ny /= norm;
  nz /= norm;
  CMat h(2, 2);
  h << nz, std::complex<double>(nx, -ny), std::complex<double>(nx, ny), -nz;
  CMat u = std::cos(0.5 * angle) * CMat::Identity(2, 2) -
           std::complex<double>(0.0, std::sin(0.5 * angle)) * h;
  return ptm_from_unitary(u);
}

ProcessMatrix pauli_ptm(double sx, double sy, double sz) {
  RMat d = RMat::Zero(4, 4);
  d.diagonal() << 1.0, sx, sy, sz;
  return ProcessMatrix(4, d);
}

// Independent half-diamond-norm evaluation: a Bloch-ball grid over input
// states rho with f(rho) = ||(sqrt(rho) (x) I) J (sqrt(rho) (x) I)||_1 / 2,
// J the (trace-d) Choi matrix of the channel difference.
double bloch_grid_half_diamond(const ProcessMatrix& a,
                               const ProcessMatrix& b) {
  ProcessMatrix delta(4, a.m - b.m);
  CMat j = 2.0 * choi_of(delta);
  double best = 0.0;
  for (int ir = 0; ir <= 20; ++ir) {
    double r = ir / 20.0;
    for (int it = 0; it <= 24; ++it) {
      double th = M_PI * it / 24.0;
      for (int ip = 0; ip < 48; ++ip) {
        double ph = 2.0 * M_PI * ip / 48.0;
        double x = r * std::sin(th) * std::cos(ph);
        double y = r * std::sin(th) * std::sin(ph);
        double z = r * std::cos(th);
        CMat rho(2, 2);
        rho << 0.5 * (1.0 + z), 0.5 * std::complex<double>(x, -y),
            0.5 * std::complex<double>(x, y), 0.5 * (1.0 - z);
        Eigen::SelfAdjointEigenSolver<CMat> es(rho);
        CMat rh = es.operatorSqrt();
        CMat s = CMat::Zero(4, 4);
        s.topLeftCorner(2, 2) = rh(0, 0) * CMat::Identity(2, 2);
        s.topRightCorner(2, 2) = rh(0, 1) * CMat::Identity(2, 2);
        s.bottomLeftCorner(2, 2) = rh(1, 0) * CMat::Identity(2, 2);
        s.bottomRightCorner(2, 2) = rh(1, 1) * CMat::Identity(2, 2);
        CMat m = s * j * s;
        Eigen::SelfAdjointEigenSolver<CMat> em((m + m.adjoint()) / 2.0);
        best = std::max(best, 0.5 * em.eigenvalues().cwiseAbs().sum());
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("lambda_llr reproduces the binomial hand value") {
  // Ideal model on one X quarter turn: p = (1/2, 0, 1/2, 0) against
  // observed (3/4, 0, 1/4, 0) at N = 4.
  GateSetModel m = instantiate_ideal(Family::CrosstalkFree);
  Dataset ds = hand_dataset({3, 0, 1, 0}, "[Gxpi2:0,Gi:1]");
  double want = 8.0 * (0.75 * std::log(1.5) + 0.25 * std::log(0.5));
  CHECK(lambda_llr(m, ds) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("n_sigma arithmetic") {
  CHECK(n_sigma(100.0, 100) == doctest::Approx(0.0));
  CHECK(n_sigma(100.0 + 2.0 * std::sqrt(200.0), 100) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(n_sigma(1.0, 0), ValidationError);
}

TEST_CASE("evidence ratio arithmetic") {
  // gamma = (148.82e3 - 77.60e3) / (230 - 86) = 494.58...
  FitSummary cf{148.82e3, 86};
  FitSummary cd{77.60e3, 230};
  CHECK(evidence_ratio(cd, cf) == doctest::Approx(494.5833).epsilon(1e-6));
  CHECK_THROWS_AS(evidence_ratio(cf, cd), ValidationError);

  FitResult a = summary_fit(Family::CrosstalkFree, 148.82e3);
  FitResult b = summary_fit(Family::ContextDependent, 77.60e3);
  CHECK(evidence_ratio(b, a) == doctest::Approx(494.5833).epsilon(1e-6));
}

TEST_CASE("model selection walks the nest from the smallest family") {
  auto fits = [&](double l_cf, double l_cd, double l_gen) {
    return std::vector<FitResult>{summary_fit(Family::CrosstalkFree, l_cf),
                                  summary_fit(Family::ContextDependent, l_cd),
                                  summary_fit(Family::General, l_gen)};
  };
  // gamma_cd = (lcf - lcd) / 144, gamma_gen = (lcd - lgen) / 1993.
  SelectionResult r = select_model(fits(5000.0, 4900.0, 4000.0));
  CHECK(r.selected == Family::CrosstalkFree);  // gamma_cd = 0.69
  CHECK(r.gamma_cd_over_cf == doctest::Approx(100.0 / 144.0));

  r = select_model(fits(5000.0, 4000.0, 3500.0));
  CHECK(r.selected == Family::ContextDependent);  // 6.9 then 0.25
  CHECK(r.gamma_gen_over_cd == doctest::Approx(500.0 / 1993.0));

  r = select_model(fits(20000.0, 15000.0, 5000.0));
  CHECK(r.selected == Family::General);  // 34.7 then 5.0
  CHECK(!r.rule.empty());

  auto wrong = fits(1.0, 1.0, 1.0);
  std::swap(wrong[0], wrong[1]);
  CHECK_THROWS_AS(select_model(wrong), ValidationError);
}

TEST_CASE("wildcard relaxation properties on random inputs") {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::array<double, 4> raw{u(rng) + 1e-3, u(rng) + 1e-3, u(rng) + 1e-3,
                              u(rng) + 1e-3};
    double zp = raw[0] + raw[1] + raw[2] + raw[3];
    std::array<double, 4> p{raw[0] / zp, raw[1] / zp, raw[2] / zp,
                            raw[3] / zp};
    std::array<double, 4> counts{};
    for (int k = 0; k < 4; ++k)
      counts[k] = std::floor(100.0 * u(rng)) * (u(rng) < 0.85 ? 1.0 : 0.0);
    if (counts[0] + counts[1] + counts[2] + counts[3] == 0.0) counts[0] = 7.0;
    double shots = counts[0] + counts[1] + counts[2] + counts[3];
    std::array<double, 4> f{counts[0] / shots, counts[1] / shots,
                            counts[2] / shots, counts[3] / shots};

    double prev = relax_llr(counts, p);
    for (double budget : {0.005, 0.02, 0.1, 0.4}) {
      auto out = wildcard_relax(p, counts, budget);
      double z = 0.0;
      for (int k = 0; k < 4; ++k) {
        CHECK(out[k] >= -1e-12);
        z += out[k];
      }
      CHECK(z == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(tvd4(out, p) <= budget + 1e-9);
      double llr = relax_llr(counts, out);
      CHECK(llr <= prev + 1e-9);  // larger budgets never fit worse
      prev = llr;
      if (budget >= tvd4(f, p)) {
        for (int k = 0; k < 4; ++k)
          CHECK(out[k] == doctest::Approx(f[k]).epsilon(1e-9));
        CHECK(llr == doctest::Approx(0.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("wildcard relaxation beats a dense simplex search") {
  // The water-filled optimum should match (to grid resolution) a brute
  // force search over the TVD ball around p.
  std::array<double, 4> p{0.55, 0.25, 0.15, 0.05};
  std::array<double, 4> counts{30.0, 45.0, 5.0, 20.0};
  double budget = 0.08;
  auto out = wildcard_relax(p, counts, budget);
  double got = relax_llr(counts, out);
  double best = relax_llr(counts, p);
  int n = 48;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; i + j <= n; ++j)
      for (int k = 0; i + j + k <= n; ++k) {
        std::array<double, 4> q{budget * (2.0 * i / n - 1.0),
                                budget * (2.0 * j / n - 1.0),
                                budget * (2.0 * k / n - 1.0), 0.0};
        q[3] = -(q[0] + q[1] + q[2]);
        double up = 0.0;
        bool ok = true;
        std::array<double, 4> cand;
        for (int c = 0; c < 4; ++c) {
          cand[c] = p[c] + q[c];
          if (cand[c] < 0.0) ok = false;
          up += std::max(q[c], 0.0);
        }
        if (ok && up <= budget) best = std::min(best, relax_llr(counts, cand));
      }
  CHECK(got <= best + 1e-9);
}

TEST_CASE("wildcard is zero when the fitted family matches the truth") {
  GateSetModel truth = instantiate_noisy(Family::CrosstalkFree, 5, 2e-3, 2e-2);
  std::vector<Circuit> circs;
  for (const Circuit& c : build_gst_design(1).circuits)
    if (circs.size() < 400) circs.push_back(c);
  Dataset ds = sample(truth, circs, 10000, 17);
  FitConfig cfg;
  cfg.multistarts = 1;
  FitResult fr = mle_fit(Family::CrosstalkFree, ds, cfg);
  WildcardResult wr = wildcard_fit(fr, ds);
  CHECK(wr.consistent_at_zero);
  CHECK(wr.w == 0.0);
  CHECK(wr.lambda_relaxed <= wr.lambda_threshold);
  CHECK(wr.worst_circuit_llr <= wr.circuit_threshold);
}

TEST_CASE("wildcard decreases along the nest on context-dependent data") {
  GateSetModel truth =
      instantiate_noisy(Family::ContextDependent, 9, 2e-3, 3e-2);
  std::vector<Circuit> circs;
  for (const Circuit& c : build_gst_design(1).circuits)
    if (circs.size() < 500) circs.push_back(c);
  Dataset ds = sample(truth, circs, 4000, 23);
  FitConfig cfg;
  cfg.multistarts = 1;
  std::vector<FitResult> fits = fit_nested(ds, cfg);
  REQUIRE(fits.size() == 3);
  CHECK(fits[1].lambda <= fits[0].lambda + 1e-6);
  CHECK(fits[2].lambda <= fits[1].lambda + 1e-6);

  WildcardResult w_cf = wildcard_fit(fits[0], ds);
  WildcardResult w_cd = wildcard_fit(fits[1], ds);
  CHECK(w_cd.w <= w_cf.w + 1e-4);
  // Budgets scale with circuit depth.
  CompiledData cd = compile(ds);
  for (size_t i = 0; i < cd.circuits.size(); ++i)
    CHECK(w_cf.per_circuit_budget[i] ==
          doctest::Approx(w_cf.w * cd.circuits[i].layers.size()));

  ComparisonReport rep = compare_models(fits, ds);
  CHECK(rep.rows[0].family == Family::CrosstalkFree);
  CHECK(rep.rows[2].family == Family::General);
  for (int i = 0; i < 3; ++i) {
    CHECK(rep.rows[i].lambda == doctest::Approx(fits[i].lambda));
    CHECK(rep.rows[i].n_params == n_params(fits[i].model.family));
    CHECK(rep.rows[i].k == fits[i].k);
    CHECK(rep.rows[i].avg_diamond >= 0.0);
  }
  CHECK(rep.rows[0].wildcard == doctest::Approx(w_cf.w).epsilon(1e-6));
  CHECK(rep.selection.threshold == 2.0);
}

TEST_CASE("diamond distance of identical channels is zero") {
  ProcessMatrix g = rotation_ptm(0.0, 0.0, 1.0, 0.3);
  DiamondResult r = diamond_solve(g, g);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("diamond distance of a small rotation matches sin(theta/2)") {
  ProcessMatrix g = rotation_ptm(0.0, 0.0, 1.0, 0.02);
  ProcessMatrix id = ProcessMatrix::identity(4);
  DiamondResult r = diamond_solve(g, id);
  CHECK(r.converged);
  CHECK(r.lower <= r.value + 1e-12);
  CHECK(r.value <= r.upper + 1e-12);
  CHECK(r.value == doctest::Approx(std::sin(0.01)).epsilon(1e-3));
  CHECK(std::abs(r.value - std::sin(0.01)) < 1e-5);
}

TEST_CASE("diamond distance of complete depolarization is 3/4") {
  ProcessMatrix dep = pauli_ptm(0.0, 0.0, 0.0);
  ProcessMatrix id = ProcessMatrix::identity(4);
  CHECK(diamond_distance(dep, id) == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("diamond distance agrees with a Bloch-ball grid search") {
  ProcessMatrix a =
      compose(rotation_ptm(0.3, 0.5, 0.8, 0.7), pauli_ptm(0.9, 0.85, 0.8));
  ProcessMatrix b =
      compose(rotation_ptm(0.0, 0.0, 1.0, 0.05), pauli_ptm(0.95, 0.95, 0.9));
  DiamondResult r = diamond_solve(a, b);
  double grid = bloch_grid_half_diamond(a, b);
  CHECK(r.converged);
  CHECK(grid <= r.upper + 1e-9);  // grid never exceeds the certified bound
  CHECK(r.value >= grid - 1e-9);
  CHECK(r.value <= grid + 2e-3);  // grid resolution limits the gap
}

TEST_CASE("diamond distance is a metric on random channels") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random_channel = [&]() {
    ProcessMatrix rot =
        rotation_ptm(u(rng), u(rng), u(rng), 0.4 * std::abs(u(rng)));
    return compose(rot, pauli_ptm(0.9 + 0.05 * u(rng), 0.9 + 0.05 * u(rng),
                                  0.9 + 0.05 * u(rng)));
  };
  for (int trial = 0; trial < 3; ++trial) {
    ProcessMatrix a = random_channel();
    ProcessMatrix b = random_channel();
    ProcessMatrix c = random_channel();
    double ab = diamond_distance(a, b);
    double ba = diamond_distance(b, a);
    double bc = diamond_distance(b, c);
    double ac = diamond_distance(a, c);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-5));
    CHECK(ac <= ab + bc + 1e-6);
    CHECK(ab > 0.0);
  }
}

TEST_CASE("average diamond error vanishes for the ideal model") {
  CHECK(avg_diamond_error(instantiate_ideal(Family::General)) ==
        doctest::Approx(0.0).epsilon(1e-9));
  CHECK(avg_diamond_error(instantiate_noisy(Family::General, 3, 2e-3, 1e-2)) >
        1e-4);
}
