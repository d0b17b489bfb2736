#include "xtalk/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <unsupported/Eigen/KroneckerProduct>

namespace xtalk {

double lambda_llr(const GateSetModel& m, const Dataset& ds) {
  CompiledData cd = compile(ds);
  return -2.0 * (loglikelihood(m.channels(), cd) - cd.log_l_max);
}

double n_sigma(double lambda, int k) {
  if (k <= 0) throw ValidationError("n_sigma: k must be positive");
  return (lambda - k) / std::sqrt(2.0 * k);
}

double evidence_ratio(const FitSummary& large, const FitSummary& small) {
  if (large.n_params <= small.n_params)
    throw ValidationError(
        "evidence_ratio: first argument must be the larger model");
  return (small.lambda - large.lambda) /
         static_cast<double>(large.n_params - small.n_params);
}

double evidence_ratio(const FitResult& large, const FitResult& small) {
  if (!family_nested_in(small.model.family, large.model.family))
    throw ValidationError("evidence_ratio: families are not nested");
  return evidence_ratio(
      FitSummary{large.lambda, n_params(large.model.family)},
      FitSummary{small.lambda, n_params(small.model.family)});
}

SelectionResult select_model(const std::vector<FitResult>& fits,
                             double threshold) {
  if (fits.size() != 3 || fits[0].model.family != Family::CrosstalkFree ||
      fits[1].model.family != Family::ContextDependent ||
      fits[2].model.family != Family::General)
    throw ValidationError("select_model: expected fits in nesting order");
  SelectionResult r;
  r.threshold = threshold;
  r.gamma_cd_over_cf = evidence_ratio(fits[1], fits[0]);
  r.gamma_gen_over_cd = evidence_ratio(fits[2], fits[1]);
  std::ostringstream rule;
  if (r.gamma_cd_over_cf <= threshold) {
    r.selected = Family::CrosstalkFree;
    rule << "gamma(context-dependent over crosstalk-free) = "
         << r.gamma_cd_over_cf << " <= " << threshold
         << ": crosstalk-free accepted";
  } else if (r.gamma_gen_over_cd <= threshold) {
    r.selected = Family::ContextDependent;
    rule << "gamma(context-dependent over crosstalk-free) = "
         << r.gamma_cd_over_cf << " > " << threshold
         << ", gamma(general over context-dependent) = "
         << r.gamma_gen_over_cd << " <= " << threshold
         << ": context-dependent accepted";
  } else {
    r.selected = Family::General;
    rule << "both evidence ratios exceed " << threshold
         << ": general accepted";
  }
  r.rule = rule.str();
  return r;
}

// --- wildcard ---------------------------------------------------------------

namespace {

double circuit_llr(const std::array<double, 4>& counts,
                   const std::array<double, 4>& p) {
  double shots = counts[0] + counts[1] + counts[2] + counts[3];
  double llr = 0.0;
  for (int k = 0; k < 4; ++k)
    if (counts[k] > 0)
      llr += 2.0 * counts[k] * (std::log(counts[k] / shots) - std::log(p[k]));
  return llr;
}

}  // namespace

std::array<double, 4> wildcard_relax(const std::array<double, 4>& p,
                                     const std::array<double, 4>& counts,
                                     double budget) {
  double shots = counts[0] + counts[1] + counts[2] + counts[3];
  if (shots <= 0 || budget <= 0) return p;
  std::array<double, 4> f;
  double tvd = 0.0;
  for (int k = 0; k < 4; ++k) {
    f[k] = counts[k] / shots;
    tvd += std::max(f[k] - p[k], 0.0);
  }
  if (budget >= tvd) return f;

  // Raise under-predicted outcomes to a common count/probability level L:
  // the coordinates with the largest counts[k]/p[k] ratios receive first.
  // Closed form within each active prefix because the received mass is
  // sum(n)/L - sum(p).
  std::array<int, 4> order{0, 1, 2, 3};
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return counts[a] / p[a] > counts[b] / p[b]; });
  std::array<double, 4> out = p;
  double sn = 0.0, sp = 0.0, level = 0.0;
  for (int idx = 0; idx < 4; ++idx) {
    int k = order[idx];
    sn += counts[k];
    sp += p[k];
    double cand = sn / (sp + budget);
    double next = idx < 3 ? counts[order[idx + 1]] / p[order[idx + 1]] : 0.0;
    level = cand;
    if (cand >= next && cand <= counts[k] / p[k]) break;
  }
  for (int k = 0; k < 4; ++k)
    if (counts[k] / p[k] > level) out[k] = counts[k] / level;

  // Donate the same mass from over-predicted outcomes. Zero-count
  // coordinates donate for free; any remainder comes from the smallest
  // count/probability ratios, lowered to a common level.
  double give = budget;
  double zero_mass = 0.0;
  for (int k = 0; k < 4; ++k)
    if (counts[k] == 0) zero_mass += out[k];
  if (give <= zero_mass) {
    double scale = (zero_mass - give) / zero_mass;
    for (int k = 0; k < 4; ++k)
      if (counts[k] == 0) out[k] *= scale;
    return out;
  }
  for (int k = 0; k < 4; ++k)
    if (counts[k] == 0) out[k] = 0.0;
  give -= zero_mass;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return counts[a] / p[a] < counts[b] / p[b]; });
  sn = 0.0;
  sp = 0.0;
  double low = 0.0;
  for (int idx = 0; idx < 4; ++idx) {
    int k = order[idx];
    if (counts[k] == 0 || out[k] != p[k]) continue;  // donor pool only
    sn += counts[k];
    sp += p[k];
    if (sp <= give) continue;  // prefix cannot supply the mass yet
    double cand = sn / (sp - give);
    int j = idx + 1;
    while (j < 4 && (counts[order[j]] == 0 || out[order[j]] != p[order[j]]))
      ++j;
    double next = j < 4 ? counts[order[j]] / p[order[j]]
                        : std::numeric_limits<double>::infinity();
    low = cand;
    if (cand >= counts[k] / p[k] && cand <= next) break;
  }
  for (int k = 0; k < 4; ++k)
    if (counts[k] > 0 && out[k] == p[k] && counts[k] / p[k] < low)
      out[k] = counts[k] / low;
  return out;
}

WildcardResult wildcard_fit(const FitResult& fit, const Dataset& ds,
                            double alpha) {
  CompiledData cd = compile(ds);
  const int n = static_cast<int>(cd.circuits.size());
  if (static_cast<int>(fit.per_circuit_llr.size()) != n)
    throw ValidationError("wildcard_fit: fit and dataset do not match");
  Channels ch = fit.model.channels();
  std::vector<std::array<double, 4>> preds(n);
  for (int i = 0; i < n; ++i) preds[i] = predicted_probs(ch, cd.circuits[i]);

  boost::math::chi_squared chi3(3.0);
  const double circuit_threshold =
      boost::math::quantile(chi3, 1.0 - alpha / n);
  // Five-sigma aggregate consistency, matching the N_sigma convention used
  // for model violation. A two-sigma cut would flag well-converged null
  // fits: gauge freedom and flat likelihood directions leave a small
  // positive bias in lambda even when the model family contains the truth.
  const double lambda_threshold =
      fit.k + 5.0 * std::sqrt(2.0 * fit.k);

  WildcardResult res;
  res.lambda_threshold = lambda_threshold;
  res.circuit_threshold = circuit_threshold;

  auto evaluate = [&](double w) {
    double lambda = 0.0, worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const CompiledCircuit& cc = cd.circuits[i];
      double budget = w * std::max<double>(1.0, cc.layers.size());
      auto relaxed = wildcard_relax(preds[i], cc.counts, budget);
      double llr = circuit_llr(cc.counts, relaxed);
      lambda += llr;
      worst = std::max(worst, llr);
    }
    res.lambda_relaxed = lambda;
    res.worst_circuit_llr = worst;
    return lambda <= lambda_threshold && worst <= circuit_threshold;
  };

  if (evaluate(0.0)) {
    res.w = 0.0;
    res.consistent_at_zero = true;
  } else {
    // p' = f is reachable once every budget covers its circuit's TVD gap,
    // so W = 1 always satisfies the predicate (budgets are floored at one
    // layer, covering the depth-zero fiducial-pair circuit).
    double lo = 0.0, hi = 1.0;
    while (hi - lo > 1e-5) {
      double mid = 0.5 * (lo + hi);
      if (evaluate(mid))
        hi = mid;
      else
        lo = mid;
    }
    res.w = hi;
    evaluate(hi);  // leave diagnostics at the reported W
  }
  res.per_circuit_budget.resize(n);
  for (int i = 0; i < n; ++i)
    res.per_circuit_budget[i] =
        res.w * std::max<double>(1.0, cd.circuits[i].layers.size());
  return res;
}

// --- diamond distance -------------------------------------------------------

namespace {

// sqrt(rho) (x) I and its inverse, eigenvalues floored to keep the dual
// certificate finite. The certificate stays valid: feasibility of Z only
// needs Z >= J and Z >= 0, not the exact rho that produced it.
void sqrt_factors(const CMat& rho, int d, CMat& s, CMat& s_inv) {
  Eigen::SelfAdjointEigenSolver<CMat> es(rho);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(1e-14);
  CMat r_half = es.eigenvectors() *
                ev.cwiseSqrt().asDiagonal() *
                es.eigenvectors().adjoint();
  CMat r_half_inv = es.eigenvectors() *
                    ev.cwiseSqrt().cwiseInverse().asDiagonal() *
                    es.eigenvectors().adjoint();
  CMat id = CMat::Identity(d, d);
  s = Eigen::kroneckerProduct(r_half, id);
  s_inv = Eigen::kroneckerProduct(r_half_inv, id);
}

double positive_part_trace(const CMat& k, CMat* projector) {
  Eigen::SelfAdjointEigenSolver<CMat> es(k);
  double total = 0.0;
  if (projector) projector->setZero(k.rows(), k.cols());
  for (int i = 0; i < k.rows(); ++i) {
    double ev = es.eigenvalues()(i);
    if (ev > 0) {
      total += ev;
      if (projector)
        *projector += es.eigenvectors().col(i) *
                      es.eigenvectors().col(i).adjoint();
    }
  }
  return total;
}

}  // namespace

DiamondResult diamond_solve(const ProcessMatrix& g,
                            const ProcessMatrix& target, double tol,
                            int max_iterations) {
  if (g.dim != target.dim)
    throw ValidationError("diamond_solve: dimension mismatch");
  const int n = g.dim;
  const int d = static_cast<int>(std::lround(std::sqrt(double(n))));
  ProcessMatrix delta(n, g.m - target.m);
  CMat j = static_cast<double>(d) * choi_of(delta);
  j = ((j + j.adjoint()) / 2.0).eval();

  DiamondResult res;
  if (j.norm() < 1e-15) {  // identical channels
    res.converged = true;
    return res;
  }

  CMat rho = CMat::Identity(d, d) / static_cast<double>(d);
  double best_lower = 0.0;
  double best_upper = std::numeric_limits<double>::infinity();

  auto f_of = [&](const CMat& r) {
    CMat s, s_inv;
    sqrt_factors(r, d, s, s_inv);
    return positive_part_trace(s * j * s, nullptr);
  };

  for (int it = 0; it < max_iterations; ++it) {
    res.iterations = it + 1;
    CMat s, s_inv;
    sqrt_factors(rho, d, s, s_inv);
    CMat k = s * j * s;
    CMat proj;
    double f = positive_part_trace(k, &proj);
    best_lower = std::max(best_lower, f);

    // Dual certificate Z = S^-1 K_+ S^-1 and its input-side partial trace;
    // lambda_max of the partial trace upper-bounds the optimum globally.
    CMat z = s_inv * (proj * k * proj) * s_inv;
    z = ((z + z.adjoint()) / 2.0).eval();
    CMat grad = CMat::Zero(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int o = 0; o < d; ++o) grad(a, b) += z(a * d + o, b * d + o);
    grad = ((grad + grad.adjoint()) / 2.0).eval();
    Eigen::SelfAdjointEigenSolver<CMat> eg(grad);
    best_upper = std::min(best_upper, eg.eigenvalues().maxCoeff());
    if (best_upper - best_lower <= tol) {
      res.converged = true;
      break;
    }

    // Frank-Wolfe step toward the best rank-one vertex, with a ternary
    // line search on the concave objective.
    CMat vertex = eg.eigenvectors().col(d - 1) *
                  eg.eigenvectors().col(d - 1).adjoint();
    double a = 0.0, b = 1.0;
    for (int ls = 0; ls < 24; ++ls) {
      double t1 = a + (b - a) / 3.0, t2 = b - (b - a) / 3.0;
      CMat r1 = (1.0 - t1) * rho + t1 * vertex;
      CMat r2 = (1.0 - t2) * rho + t2 * vertex;
      if (f_of(r1) < f_of(r2))
        a = t1;
      else
        b = t2;
    }
    double t = 0.5 * (a + b);
    if (t < 1e-14) t = 1.0 / (it + 2.0);  // safeguard against stalling
    rho = ((1.0 - t) * rho + t * vertex).eval();
    rho = ((rho + rho.adjoint()) / 2.0).eval();
  }
  res.lower = best_lower;
  res.upper = best_upper;
  res.value = 0.5 * (best_lower + best_upper);
  return res;
}

double diamond_distance(const ProcessMatrix& g, const ProcessMatrix& target) {
  return diamond_solve(g, target).value;
}

double avg_diamond_error(const GateSetModel& m) {
  Channels ch = m.channels();
  Channels ideal = instantiate_ideal(Family::General).channels();
  double sum = 0.0;
  for (int l = 0; l < 9; ++l)
    sum += diamond_distance(ProcessMatrix(16, ch.layer[l]),
                            ProcessMatrix(16, ideal.layer[l]));
  return sum / 9.0;
}

ComparisonReport compare_models(const std::vector<FitResult>& fits,
                                const Dataset& ds, double alpha,
                                double threshold) {
  ComparisonReport rep;
  rep.selection = select_model(fits, threshold);
  for (int i = 0; i < 3; ++i) {
    ModelRow& row = rep.rows[i];
    row.family = fits[i].model.family;
    row.n_params = n_params(row.family);
    row.lambda = fits[i].lambda;
    row.k = fits[i].k;
    row.n_sigma = fits[i].n_sigma;
    row.wildcard = wildcard_fit(fits[i], ds, alpha).w;
    row.avg_diamond = avg_diamond_error(fits[i].model);
  }
  return rep;
}

}  // namespace xtalk
