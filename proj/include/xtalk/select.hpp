#ifndef XTALK_SELECT_HPP
#define XTALK_SELECT_HPP

#include "xtalk/fit.hpp"

#include <array>
#include <string>
#include <vector>

// Model comparison on a common dataset: log-likelihood-ratio lambda, its
// standardized form N_sigma, the per-parameter evidence ratio gamma between
// nested fits, the single-parameter wildcard error W, and diamond-distance
// summaries against the ideal gate set.

namespace xtalk {

// lambda and parameter count of one fit, the inputs the comparison
// arithmetic needs. Detached from FitResult so published table values can be
// checked directly.
struct FitSummary {
  double lambda = 0.0;
  int n_params = 0;
};

// -2 (log L - log Lmax) of a model on a dataset.
double lambda_llr(const GateSetModel& m, const Dataset& ds);

// (lambda - k) / sqrt(2k); throws when k <= 0.
double n_sigma(double lambda, int k);

// gamma = (lambda_small - lambda_large) / (Np_large - Np_small); requires
// Np_large > Np_small. The first argument is the larger (better-fitting)
// model.
double evidence_ratio(const FitSummary& large, const FitSummary& small);
double evidence_ratio(const FitResult& large, const FitResult& small);

// Walk the nest from the smallest family and accept a family as soon as the
// evidence ratio of the next-larger fit over it is at or below the
// threshold. fits must be in nesting order (crosstalk-free, context-
// dependent, general).
struct SelectionResult {
  Family selected = Family::CrosstalkFree;
  double gamma_cd_over_cf = 0.0;
  double gamma_gen_over_cd = 0.0;
  double threshold = 2.0;
  std::string rule;  // human-readable decision trace
};

SelectionResult select_model(const std::vector<FitResult>& fits,
                             double threshold = 2.0);

// Wildcard error: the smallest per-gate total-variation budget W such that
// relaxing each circuit's prediction within a TVD ball of radius
// W * max(1, depth) — the floor gives the depth-zero fiducial-pair circuit
// a SPAM relaxation allowance —
// makes the model consistent with the data. Consistency criterion: the
// relaxed aggregate lambda is at most k + 5 sqrt(2k) (the five-sigma
// model-violation convention) and every relaxed
// per-circuit LLR is at most the chi^2_3 quantile at Bonferroni level
// alpha / n_circuits.
struct WildcardResult {
  double w = 0.0;
  std::vector<double> per_circuit_budget;  // w * layer count
  double lambda_relaxed = 0.0;             // aggregate LLR at the fitted W
  double lambda_threshold = 0.0;           // k + 5 sqrt(2k)
  double circuit_threshold = 0.0;          // chi^2_3 Bonferroni quantile
  double worst_circuit_llr = 0.0;
  bool consistent_at_zero = false;
};

WildcardResult wildcard_fit(const FitResult& fit, const Dataset& ds,
                            double alpha = 0.05);

// The TVD-ball-constrained distribution minimizing one circuit's LLR
// contribution: probability mass is water-filled from over-predicted to
// under-predicted outcomes until the budget or the empirical frequencies are
// reached. Exposed for property tests.
std::array<double, 4> wildcard_relax(const std::array<double, 4>& p,
                                     const std::array<double, 4>& counts,
                                     double budget);

// Half diamond norm of (g - target) via the semidefinite characterization
// max { <J(g - target), W> : 0 <= W <= rho (x) I, Tr rho = 1 }, solved with
// a Frank-Wolfe ascent on rho whose dual certificate gives rigorous
// lower/upper bounds.
struct DiamondResult {
  double value = 0.0;  // midpoint of the certified interval
  double lower = 0.0;
  double upper = 0.0;
  int iterations = 0;
  bool converged = false;  // certified gap at or below tolerance
};

DiamondResult diamond_solve(const ProcessMatrix& g,
                            const ProcessMatrix& target, double tol = 1e-6,
                            int max_iterations = 20000);
double diamond_distance(const ProcessMatrix& g, const ProcessMatrix& target);

// Mean diamond distance of the 9 layer channels from the ideal layers.
double avg_diamond_error(const GateSetModel& m);

// Per-model rows plus the pairwise evidence ratios, mirroring the fit
// quality table in the report JSON.
struct ModelRow {
  Family family = Family::CrosstalkFree;
  int n_params = 0;
  double lambda = 0.0;
  int k = 0;
  double n_sigma = 0.0;
  double wildcard = 0.0;
  double avg_diamond = 0.0;
  double avg_diamond_ci = 0.0;  // percentile half width; 0 if no bootstrap
};

struct ComparisonReport {
  std::array<ModelRow, 3> rows;  // nesting order
  SelectionResult selection;
};

// Fits in nesting order -> full report (wildcard and diamond included).
ComparisonReport compare_models(const std::vector<FitResult>& fits,
                                const Dataset& ds, double alpha = 0.05,
                                double threshold = 2.0);

}  // namespace xtalk

#endif
