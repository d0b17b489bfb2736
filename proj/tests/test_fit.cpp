#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "xtalk/fit.hpp"

#include <cmath>

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

}  // namespace

TEST_CASE("log-likelihood ratio against the binomial hand value") {
  // Ideal model on one X quarter turn: p = (1/2, 0, 1/2, 0). Observed
  // frequencies (3/4, 0, 1/4, 0) at N = 4 give
  // lambda = 2*4*(0.75 ln(0.75/0.5) + 0.25 ln(0.25/0.5)).
  GateSetModel m = instantiate_ideal(Family::CrosstalkFree);
  Dataset ds = hand_dataset({3, 0, 1, 0}, "[Gxpi2:0,Gi:1]");
  double lambda = -2.0 * (loglikelihood(m, ds) - max_loglikelihood(ds));
  double want = 8.0 * (0.75 * std::log(1.5) + 0.25 * std::log(0.5));
  CHECK(lambda == doctest::Approx(want).epsilon(1e-9));
  CHECK(want == doctest::Approx(1.046).epsilon(1e-3));
}

TEST_CASE("perfect frequencies give zero lambda") {
  GateSetModel m = instantiate_ideal(Family::CrosstalkFree);
  Dataset ds = hand_dataset({2, 0, 2, 0}, "[Gxpi2:0,Gi:1]");
  // The probability clip at 1e-12 leaves a comparable remainder in lambda.
  CHECK(std::abs(-2.0 * (loglikelihood(m, ds) - max_loglikelihood(ds))) <
        1e-9);
}

TEST_CASE("deterministic data has zero max log-likelihood") {
  Dataset ds = hand_dataset({100, 0, 0, 0}, "");
  CHECK(max_loglikelihood(ds) == 0.0);
}

TEST_CASE("objective gradients match finite differences") {
  GateSetModel truth = instantiate_perturbed(Family::CrosstalkFree, 3, 0.03);
  std::vector<Circuit> circs;
  for (const Circuit& c : build_gst_design(1).circuits)
    if (circs.size() < 40) circs.push_back(c);
  Dataset ds = sample(truth, circs, 200, 17);
  CompiledData cd = compile(ds);

  for (Family f : {Family::CrosstalkFree, Family::ContextDependent,
                   Family::General}) {
    GateSetModel m = instantiate_perturbed(f, 29, 0.05);
    for (bool chi2 : {false, true}) {
      Eigen::VectorXd grad(m.theta.size());
      fit_objective(m, cd, chi2, 50.0, &grad);
      const double h = 1e-6;
      double worst = 0.0;
      int stride = std::max<int>(1, static_cast<int>(m.theta.size()) / 29);
      for (int i = 0; i < m.theta.size(); i += stride) {
        GateSetModel mp = m, mm = m;
        mp.theta(i) += h;
        mm.theta(i) -= h;
        double fd = (fit_objective(mp, cd, chi2, 50.0, nullptr) -
                     fit_objective(mm, cd, chi2, 50.0, nullptr)) /
                    (2 * h);
        worst = std::max(worst,
                         std::abs(fd - grad(i)) / (1.0 + std::abs(fd)));
      }
      INFO("family ", family_name(f), " chi2 ", chi2, " worst ", worst);
      CHECK(worst < 1e-5);
    }
  }
}

TEST_CASE("cp penalty activates on non-cp channels and has a valid gradient") {
  // A strongly perturbed model without any CP projection will violate
  // positivity; the penalty must see it.
  GateSetModel m = instantiate_perturbed(Family::General, 5, 0.2);
  Dataset ds = hand_dataset({1, 1, 1, 1}, "[Gxpi2:0,Gi:1]");
  CompiledData cd = compile(ds);
  double with = fit_objective(m, cd, false, 1e4, nullptr);
  double without = fit_objective(m, cd, false, 0.0, nullptr);
  CHECK(with > without + 1e-6);
}

TEST_CASE("crosstalk-free fit of crosstalk-free data is well calibrated") {
  GateSetModel truth = instantiate_noisy(Family::CrosstalkFree, 11, 2e-3, 2e-2);
  Dataset ds = sample(truth, build_gst_design(1).circuits, 500, 101);
  FitConfig cfg;
  cfg.seed = 7;
  FitResult fr = mle_fit(Family::CrosstalkFree, ds, cfg);
  CHECK(fr.diag.converged);
  CHECK(fr.lambda >= -1e-6);
  CHECK(std::abs(fr.n_sigma) < 4.0);
  double sum = 0.0;
  for (double v : fr.per_circuit_llr) sum += v;
  CHECK(sum == doctest::Approx(fr.lambda).epsilon(1e-9));
  CHECK(fr.k == 3 * static_cast<int>(ds.rows.size()) - 86);
}

TEST_CASE("nested fits give monotone lambda") {
  GateSetModel truth = instantiate_noisy(Family::ContextDependent, 4, 2e-3, 2e-2);
  Dataset ds = sample(truth, build_gst_design(1).circuits, 300, 55);
  FitConfig cfg;
  cfg.seed = 3;
  auto fits = fit_nested(ds, cfg);
  REQUIRE(fits.size() == 3);
  CHECK(fits[0].model.family == Family::CrosstalkFree);
  CHECK(fits[2].model.family == Family::General);
  CHECK(fits[1].lambda <= fits[0].lambda + 1e-6);
  CHECK(fits[2].lambda <= fits[1].lambda + 1e-6);
}

TEST_CASE("refitting from the optimum is a fixed point") {
  GateSetModel truth = instantiate_noisy(Family::CrosstalkFree, 2, 2e-3, 1e-2);
  Dataset ds = sample(truth, build_gst_design(1).circuits, 200, 9);
  FitConfig cfg;
  FitResult first = mle_fit(Family::CrosstalkFree, ds, cfg);
  FitResult again = mle_fit(Family::CrosstalkFree, ds, cfg, &first.model);
  CHECK(std::abs(again.loglike - first.loglike) < 1e-7 *
                                                      (1.0 +
                                                       std::abs(first.loglike)));
}

TEST_CASE("bootstrap replicates are deterministic and shrink with shots") {
  GateSetModel truth = instantiate_noisy(Family::CrosstalkFree, 21, 2e-3, 1e-2);
  std::vector<Circuit> circs;
  for (const Circuit& c : build_gst_design(1).circuits)
    if (circs.size() < 40) circs.push_back(c);
  FitConfig cfg;
  cfg.multistarts = 1;
  cfg.max_iterations = 600;
  cfg.grad_tol = 1e-6;
  auto width_at = [&](std::int64_t shots) {
    Dataset ds = sample(truth, circs, shots, 33);
    FitResult fr = mle_fit(Family::CrosstalkFree, ds, cfg);
    BootstrapResult br = bootstrap_fit(fr, ds, 8, 5, cfg);
    REQUIRE(br.replicates.size() + br.dropped == 8);
    // Track a predicted outcome probability rather than a raw parameter:
    // probabilities are identified by the data even when individual
    // coordinates are only weakly constrained by a 40-circuit design.
    std::vector<double> vals;
    for (const GateSetModel& r : br.replicates)
      vals.push_back(probabilities(r.channels(), circs[10])[0]);
    return percentile_half_width(vals);
  };
  double w100 = width_at(100);
  double w1600 = width_at(1600);
  CHECK(w1600 < w100);          // ~1/sqrt(16) = 4x expected
  CHECK(w1600 < 0.6 * w100);    // allow generous slack on 8 replicates
}

TEST_CASE("percentile half width on a known spread") {
  std::vector<double> v;
  for (int i = 0; i <= 1000; ++i) v.push_back(i / 1000.0);  // uniform [0,1]
  CHECK(percentile_half_width(v) == doctest::Approx(0.475).epsilon(1e-6));
  CHECK(percentile_half_width({1.0}) == 0.0);
}
