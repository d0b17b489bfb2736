#ifndef XTALK_FIT_HPP
#define XTALK_FIT_HPP

#include "xtalk/models.hpp"
#include "xtalk/simulate.hpp"

#include <cstdint>
#include <vector>

// Maximum-likelihood fitting of a model family to a dataset. Two stages: a
// frequency-weighted chi^2 surrogate followed by a log-likelihood polish,
// both driven by analytic adjoint gradients through an L-BFGS loop. CP is
// not structural; violations are discouraged by a quadratic penalty on
// negative Choi eigenvalues with an increasing weight schedule, and the
// residual violation is reported. Nested families must be seeded from the
// embedded optimum of the smaller family so that lambda is monotone along
// the nest.

namespace xtalk {

struct CompiledCircuit {
  std::vector<int> layers;        // layer indices, execution order
  std::array<double, 4> counts{};
  double shots = 0.0;
  std::array<double, 4> freq{};
};

struct CompiledData {
  std::vector<CompiledCircuit> circuits;
  std::vector<std::string> serialized;  // aligned with circuits
  double total_shots = 0.0;
  double log_l_max = 0.0;  // sum of N_c f log f with 0 log 0 = 0
};

CompiledData compile(const Dataset& ds);

// Clipped-and-renormalized outcome distribution a model predicts for one
// compiled circuit; the same convention the likelihood uses.
std::array<double, 4> predicted_probs(const Channels& ch,
                                      const CompiledCircuit& cc);

double loglikelihood(const Channels& ch, const CompiledData& cd);
double loglikelihood(const GateSetModel& m, const Dataset& ds);
double max_loglikelihood(const Dataset& ds);

struct FitConfig {
  int max_iterations = 2000;
  double grad_tol = 1e-5;           // infinity norm of the gradient
  // Progress stall stop: quit after 12 iterations whose objective drop is
  // below stall_tol * (1 + |f|).
  double stall_tol = 1e-8;
  // Scaled by the dataset's total shot count at fit time so the penalty
  // keeps pace with the likelihood.
  std::vector<double> cp_weights = {1e-3, 1e-2};
  std::uint64_t seed = 0;
  int multistarts = 3;              // smallest family only
  int bootstrap_replicates = 50;
  bool verbose = false;
};

struct FitDiagnostics {
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;
  double cp_violation = 0.0;  // rms negative Choi eigenvalue over layers
};

struct FitResult {
  GateSetModel model;
  double loglike = 0.0;
  double lambda = 0.0;  // -2 (log L - log Lmax)
  int k = 0;            // 3 * n_circuits - n_params
  double n_sigma = 0.0;
  std::vector<double> per_circuit_llr;  // sums to lambda
  FitDiagnostics diag;
};

// Objective evaluated by the optimizer (negative log-likelihood or the
// chi^2 surrogate, plus the CP penalty), with its analytic gradient;
// exposed so the gradient can be verified against finite differences.
double fit_objective(const GateSetModel& m, const CompiledData& cd,
                     bool chi2_stage, double cp_weight,
                     Eigen::VectorXd* grad);

// Fit one family. If seed_model is given its family must embed into f and
// the optimization starts from the embedded parameters; otherwise the start
// is the ideal model plus a small seeded perturbation (with multistarts for
// the crosstalk-free family).
FitResult mle_fit(Family f, const Dataset& ds, const FitConfig& cfg,
                  const GateSetModel* seed_model = nullptr);

// All three families in nesting order, each seeded from the previous
// optimum, guaranteeing lambda(general) <= lambda(cd) <= lambda(cf).
std::vector<FitResult> fit_nested(const Dataset& ds, const FitConfig& cfg);

// Parametric bootstrap: resample counts from the fitted probabilities,
// refit seeded from the fit, keep converged replicate models so callers can
// propagate to any derived scalar. Non-converged replicates are dropped and
// counted.
struct BootstrapResult {
  std::vector<GateSetModel> replicates;
  int dropped = 0;
};

BootstrapResult bootstrap_fit(const FitResult& fit, const Dataset& ds,
                              int replicates, std::uint64_t seed,
                              const FitConfig& cfg);

// Half of the 2.5-97.5 percentile spread; the reporting convention
// "1.234(5)" means 1.234 +/- 0.005.
double percentile_half_width(std::vector<double> values);

}  // namespace xtalk

#endif
