#include "xtalk/fit.hpp"

#include "xtalk/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>

namespace xtalk {

CompiledData compile(const Dataset& ds) {
  CompiledData cd;
  cd.circuits.reserve(ds.rows.size());
  cd.serialized.reserve(ds.rows.size());
  for (const DatasetRow& row : ds.rows) {
    Circuit c = parse_circuit(row.circuit);
    CompiledCircuit cc;
    cc.layers.reserve(c.layers.size());
    for (const Layer& l : c.layers) cc.layers.push_back(l.index());
    double n = static_cast<double>(row.shots());
    if (n <= 0) throw ValidationError("compile: circuit with zero shots");
    cc.shots = n;
    for (int k = 0; k < 4; ++k) {
      cc.counts[k] = static_cast<double>(row.counts[k]);
      cc.freq[k] = cc.counts[k] / n;
      if (cc.counts[k] > 0)
        cd.log_l_max += cc.counts[k] * std::log(cc.freq[k]);
    }
    cd.total_shots += n;
    cd.circuits.push_back(std::move(cc));
    cd.serialized.push_back(row.circuit);
  }
  return cd;
}

namespace {

// Clipped-and-renormalized outcome distribution, identical to the
// simulator's convention. Renormalization keeps sum(p) = 1 even for models
// outside the CP cone, which bounds the likelihood by its frequency maximum
// (Gibbs) and so keeps lambda nonnegative circuit by circuit.
std::array<double, 4> circuit_probs(const Channels& ch,
                                    const CompiledCircuit& cc) {
  return predicted_probs(ch, cc);
}

}  // namespace

std::array<double, 4> predicted_probs(const Channels& ch,
                                      const CompiledCircuit& cc) {
  Vec16 state = ch.rho;
  for (int idx : cc.layers) state = ch.layer[idx] * state;
  std::array<double, 4> raw;
  for (int k = 0; k < 4; ++k) raw[k] = ch.effect[k].dot(state);
  return clip_and_renormalize(raw);
}

double loglikelihood(const Channels& ch, const CompiledData& cd) {
  double total = 0.0;
  for (const CompiledCircuit& cc : cd.circuits) {
    auto p = circuit_probs(ch, cc);
    for (int k = 0; k < 4; ++k)
      if (cc.counts[k] > 0) total += cc.counts[k] * std::log(p[k]);
  }
  return total;
}

double loglikelihood(const GateSetModel& m, const Dataset& ds) {
  return loglikelihood(m.channels(), compile(ds));
}

double max_loglikelihood(const Dataset& ds) { return compile(ds).log_l_max; }

namespace {

// --- CP penalty -----------------------------------------------------------

// Quadratic penalty on negative Choi eigenvalues, summed over the 9 layer
// channels. The gradient with respect to layer-matrix entries follows from
// J = (1/d) sum_ab M_ab (B_b^T kron B_a) and first-order eigenvalue
// perturbation d(lambda)/dJ = v v^dag.
// Positivity penalty for a Pauli-vector operator: eigenvalues of
// sum_i v_i B_i below lo or above hi are penalized quadratically. The
// gradient follows from d(lambda)/dv_i = <w| B_i |w>.
double spam_penalty(const Vec16& vec, double lo, double hi, double weight,
                    Vec16* grad_out) {
  const auto& basis = pauli_basis(2);
  CMat op = CMat::Zero(4, 4);
  for (int i = 0; i < 16; ++i) op += vec(i) * basis[i];
  Eigen::SelfAdjointEigenSolver<CMat> es(op);
  double total = 0.0;
  for (int n = 0; n < 4; ++n) {
    double ev = es.eigenvalues()(n);
    double excess = ev < lo ? ev - lo : (ev > hi ? ev - hi : 0.0);
    if (excess == 0.0) continue;
    total += weight * excess * excess;
    if (!grad_out) continue;
    CMat v = es.eigenvectors().col(n);
    for (int i = 0; i < 16; ++i)
      (*grad_out)(i) +=
          2.0 * weight * excess * (v.adjoint() * basis[i] * v)(0, 0).real();
  }
  return total;
}

double cp_penalty(const Channels& ch, double weight, ChannelsAdjoint* adj) {
  const auto& basis = pauli_basis(2);
  const int d = 4;
  double total = 0.0;
  // State must be positive semidefinite; each POVM effect must satisfy
  // 0 <= E <= I. Without this the likelihood can exceed its frequency bound
  // through unphysical SPAM even when every layer is CP.
  total += spam_penalty(ch.rho, 0.0, std::numeric_limits<double>::infinity(),
                        weight, adj ? &adj->rho : nullptr);
  for (int e = 0; e < 4; ++e)
    total += spam_penalty(ch.effect[e], 0.0, 1.0, weight,
                          adj ? &adj->effect[e] : nullptr);
  for (int li = 0; li < 9; ++li) {
    CMat j = choi_of(ProcessMatrix(16, ch.layer[li]));
    Eigen::SelfAdjointEigenSolver<CMat> es((j + j.adjoint()) / 2.0);
    for (int n = 0; n < 16; ++n) {
      double ev = es.eigenvalues()(n);
      if (ev >= 0.0) continue;
      total += weight * ev * ev;
      if (!adj) continue;
      // v reshaped 4x4 with the B_b^T factor on rows:
      // v^dag (B_b^T kron B_a) v = Tr[V^dag B_b^T V B_a^T].
      CMat v(4, 4);
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) v(r, c) = es.eigenvectors()(4 * r + c, n);
      double coeff = 2.0 * weight * ev / d;
      for (int a = 0; a < 16; ++a) {
        CMat ra = v * basis[a].transpose();
        CMat vd = v.adjoint();
        for (int b = 0; b < 16; ++b)
          adj->layer[li](a, b) +=
              coeff * (vd * basis[b].transpose() * ra).trace().real();
      }
    }
  }
  return total;
}

double cp_violation_rms(const Channels& ch) {
  double sum = 0.0;
  int count = 0;
  sum += spam_penalty(ch.rho, 0.0, std::numeric_limits<double>::infinity(),
                      1.0, nullptr);
  for (int e = 0; e < 4; ++e)
    sum += spam_penalty(ch.effect[e], 0.0, 1.0, 1.0, nullptr);
  count += 20;
  for (int li = 0; li < 9; ++li) {
    CMat j = choi_of(ProcessMatrix(16, ch.layer[li]));
    Eigen::SelfAdjointEigenSolver<CMat> es((j + j.adjoint()) / 2.0);
    for (int n = 0; n < 16; ++n) {
      double ev = es.eigenvalues()(n);
      if (ev < 0.0) sum += ev * ev;
      ++count;
    }
  }
  return std::sqrt(sum / count);
}

// --- objective -------------------------------------------------------------

enum class Stage { Chi2, LogLike };

// Minimized objective: either the frequency-weighted chi^2 surrogate or the
// negative log-likelihood, plus the CP penalty. Gradient accumulates through
// the per-circuit adjoint into theta space.
struct Objective {
  const CompiledData* cd;
  Family family;
  Stage stage;
  double cp_weight;

  double eval(const GateSetModel& m, Eigen::VectorXd* grad) const {
    Channels ch = m.channels();
    ChannelsAdjoint adj;
    if (grad) adj.set_zero();
    double total = 0.0;
    std::vector<Vec16> fwd;
    for (const CompiledCircuit& cc : cd->circuits) {
      fwd.clear();
      fwd.push_back(ch.rho);
      for (int idx : cc.layers) fwd.push_back(ch.layer[idx] * fwd.back());
      const Vec16& out = fwd.back();
      double raw[4], clipped[4], z = 0.0;
      for (int k = 0; k < 4; ++k) {
        raw[k] = ch.effect[k].dot(out);
        clipped[k] = std::max(raw[k], kProbClip);
        z += clipped[k];
      }
      // dF/dp for the renormalized p, then pulled back through
      // p_k = c_k / z onto the raw values.
      double dfdp[4], dot = 0.0;
      for (int k = 0; k < 4; ++k) {
        double p = clipped[k] / z;
        if (stage == Stage::LogLike) {
          if (cc.counts[k] > 0) total -= cc.counts[k] * std::log(p);
          dfdp[k] = cc.counts[k] > 0 ? -cc.counts[k] / p : 0.0;
        } else {
          double denom = std::max(cc.freq[k], 0.5 / cc.shots);
          double r = p - cc.freq[k];
          total += cc.shots * r * r / denom;
          dfdp[k] = 2.0 * cc.shots * r / denom;
        }
        dot += dfdp[k] * p;
      }
      double dcoef[4];
      for (int k = 0; k < 4; ++k)
        dcoef[k] = (raw[k] > kProbClip) ? (dfdp[k] - dot) / z : 0.0;
      if (!grad) continue;
      Vec16 back = Vec16::Zero();
      for (int k = 0; k < 4; ++k) {
        if (dcoef[k] == 0.0) continue;
        adj.effect[k] += dcoef[k] * out;
        back += dcoef[k] * ch.effect[k];
      }
      for (int t = static_cast<int>(cc.layers.size()) - 1; t >= 0; --t) {
        int idx = cc.layers[t];
        adj.layer[idx] += back * fwd[t].transpose();
        back = ch.layer[idx].transpose() * back;
      }
      adj.rho += back;
    }
    if (cp_weight > 0.0)
      total += cp_penalty(ch, cp_weight, grad ? &adj : nullptr);
    if (grad) {
      grad->setZero();
      accumulate_theta_grad(m, adj, *grad);
    }
    return total;
  }

  // Diagonal of the Fisher information, sum_ck (N_c / p_ck) (dp_ck/dtheta)^2.
  // Used as a preconditioner: the likelihood curvature spans many decades
  // (it scales like N/p), which otherwise cripples L-BFGS on the larger
  // families.
  Eigen::VectorXd fisher_diag(const GateSetModel& m) const {
    Channels ch = m.channels();
    const int n = static_cast<int>(m.theta.size());
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd gk(n);
    ChannelsAdjoint adj;
    std::vector<Vec16> fwd;
    for (const CompiledCircuit& cc : cd->circuits) {
      fwd.clear();
      fwd.push_back(ch.rho);
      for (int idx : cc.layers) fwd.push_back(ch.layer[idx] * fwd.back());
      const Vec16& out = fwd.back();
      for (int k = 0; k < 4; ++k) {
        double p = std::clamp(ch.effect[k].dot(out), 1e-4, 1.0);
        adj.set_zero();
        adj.effect[k] += out;
        Vec16 back = ch.effect[k];
        for (int t = static_cast<int>(cc.layers.size()) - 1; t >= 0; --t) {
          int idx = cc.layers[t];
          adj.layer[idx] += back * fwd[t].transpose();
          back = ch.layer[idx].transpose() * back;
        }
        adj.rho += back;
        gk.setZero();
        accumulate_theta_grad(m, adj, gk);
        d += (cc.shots / p) * gk.cwiseAbs2();
      }
    }
    return d;
  }
};

// --- L-BFGS ----------------------------------------------------------------

struct MinimizeReport {
  int iterations = 0;
  bool converged = false;
  double grad_inf = 0.0;
  double value = 0.0;
};

// Limited-memory BFGS with Armijo backtracking, optionally run in scaled
// coordinates u = sqrt(D) theta where D approximates the Hessian diagonal.
// Convergence when the (physical) gradient infinity norm drops below
// tol * (1 + |f|).
MinimizeReport lbfgs(const Objective& obj, GateSetModel& m, int max_iter,
                     double tol, bool verbose = false,
                     const Eigen::VectorXd* pre = nullptr,
                     double stall_tol = 1e-8) {
  const int n = static_cast<int>(m.theta.size());
  const int mem = 20;
  std::deque<Eigen::VectorXd> ss, ys;
  std::deque<double> rhos;

  // pre holds 1/sqrt(D); theta = pre .* u. Gradients used by the recursion
  // live in u-space, while reported norms stay in physical coordinates.
  auto to_theta = [&](const Eigen::VectorXd& u) {
    return pre ? Eigen::VectorXd(pre->cwiseProduct(u)) : u;
  };

  Eigen::VectorXd g(n), g_new(n);
  double f = obj.eval(m, &g);
  MinimizeReport rep;
  rep.value = f;
  rep.grad_inf = g.lpNorm<Eigen::Infinity>();
  if (rep.grad_inf <= tol * (1.0 + std::abs(f))) {
    rep.converged = true;
    return rep;
  }
  if (pre) g = pre->cwiseProduct(g);

  Eigen::VectorXd x = pre ? Eigen::VectorXd(m.theta.cwiseQuotient(*pre))
                          : m.theta;
  int stalled = 0;
  for (int iter = 0; iter < max_iter; ++iter) {
    // Two-loop recursion for the search direction.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(ss.size());
    for (int i = static_cast<int>(ss.size()) - 1; i >= 0; --i) {
      alpha[i] = rhos[i] * ss[i].dot(q);
      q -= alpha[i] * ys[i];
    }
    if (!ss.empty()) {
      double gamma = ss.back().dot(ys.back()) / ys.back().squaredNorm();
      q *= gamma;
    } else {
      q *= 1.0 / std::max(1.0, g.norm());
    }
    for (std::size_t i = 0; i < ss.size(); ++i) {
      double beta = rhos[i] * ys[i].dot(q);
      q += (alpha[i] - beta) * ss[i];
    }
    Eigen::VectorXd dir = -q;
    double dg = dir.dot(g);
    if (dg >= 0) {  // not a descent direction; restart from steepest descent
      dir = -g;
      dg = -g.squaredNorm();
      ss.clear();
      ys.clear();
      rhos.clear();
    }

    double step = 1.0;
    double f_new = f;
    bool ok = false;
    Eigen::VectorXd u_new;
    for (int ls = 0; ls < 50; ++ls) {
      u_new = x + step * dir;
      m.theta = to_theta(u_new);
      f_new = obj.eval(m, &g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * dg) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    ++rep.iterations;
    if (!ok) {
      m.theta = to_theta(x);
      rep.value = f;
      rep.grad_inf =
          pre ? g.cwiseQuotient(*pre).lpNorm<Eigen::Infinity>()
              : g.lpNorm<Eigen::Infinity>();
      rep.converged = rep.grad_inf <= 1e2 * tol * (1.0 + std::abs(f));
      return rep;
    }
    rep.grad_inf = g_new.lpNorm<Eigen::Infinity>();
    if (pre) g_new = pre->cwiseProduct(g_new);

    Eigen::VectorXd s = step * dir;
    Eigen::VectorXd y = g_new - g;
    double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      ss.push_back(s);
      ys.push_back(y);
      rhos.push_back(1.0 / sy);
      if (static_cast<int>(ss.size()) > mem) {
        ss.pop_front();
        ys.pop_front();
        rhos.pop_front();
      }
    }
    double drop = f - f_new;
    x = u_new;
    f = f_new;
    g = g_new;
    rep.value = f;
    if (verbose && (iter % 25 == 0))
      std::fprintf(stderr, "  it %4d  f %.6e  ginf %.3e  step %.2e\n", iter,
                   f, rep.grad_inf, step);
    if (rep.grad_inf <= tol * (1.0 + std::abs(f))) {
      rep.converged = true;
      return rep;
    }
    // Value-based stop: once the objective stops moving the remaining
    // gradient is line-search noise around the optimum.
    stalled = (drop <= stall_tol * (1.0 + std::abs(f))) ? stalled + 1 : 0;
    if (stalled >= 12) {
      rep.converged = true;
      return rep;
    }
  }
  return rep;
}

// Run the staged schedule (chi^2 seed, then log-likelihood polish under the
// increasing CP weight schedule) from one starting point. Seeded refits skip
// the chi^2 stage: the seed is already near the likelihood optimum and the
// surrogate would only pull it away.
MinimizeReport run_stages(const CompiledData& cd, GateSetModel& m,
                          const FitConfig& cfg, bool seeded) {
  const double wscale = cd.total_shots;
  double w0 = (cfg.cp_weights.empty() ? 0.0 : cfg.cp_weights.front()) * wscale;
  MinimizeReport rep;
  auto precond = [&](const Objective& obj) {
    Eigen::VectorXd d = obj.fisher_diag(m);
    double floor = 1e-6 * d.maxCoeff();
    return Eigen::VectorXd(d.array().max(floor).rsqrt());
  };
  if (!seeded) {
    Objective chi2{&cd, m.family, Stage::Chi2, w0};
    if (cfg.verbose) std::fprintf(stderr, "stage chi2 (w=%g)\n", w0);
    Eigen::VectorXd pre = precond(chi2);
    rep = lbfgs(chi2, m, cfg.max_iterations, cfg.grad_tol, cfg.verbose,
                &pre, cfg.stall_tol);
  }
  std::vector<double> weights = cfg.cp_weights;
  if (weights.empty()) weights.push_back(0.0);
  for (double base : weights) {
    double w = base * wscale;
    Objective ll{&cd, m.family, Stage::LogLike, w};
    if (cfg.verbose) std::fprintf(stderr, "stage loglike (w=%g)\n", w);
    Eigen::VectorXd pre = precond(ll);
    MinimizeReport r = lbfgs(ll, m, cfg.max_iterations, cfg.grad_tol,
                             cfg.verbose, &pre, cfg.stall_tol);
    rep.iterations += r.iterations;
    rep.converged = r.converged;
    rep.grad_inf = r.grad_inf;
    rep.value = r.value;
  }
  return rep;
}

}  // namespace

double fit_objective(const GateSetModel& m, const CompiledData& cd,
                     bool chi2_stage, double cp_weight,
                     Eigen::VectorXd* grad) {
  Objective obj{&cd, m.family, chi2_stage ? Stage::Chi2 : Stage::LogLike,
                cp_weight};
  return obj.eval(m, grad);
}

FitResult mle_fit(Family f, const Dataset& ds, const FitConfig& cfg,
                  const GateSetModel* seed_model) {
  CompiledData cd = compile(ds);

  std::vector<GateSetModel> starts;
  if (seed_model) {
    if (!family_nested_in(seed_model->family, f) && seed_model->family != f)
      throw ValidationError("mle_fit: seed model family does not embed");
    starts.push_back(seed_model->family == f ? *seed_model
                                             : embed(*seed_model, f));
  } else if (f == Family::CrosstalkFree) {
    starts.push_back(instantiate_ideal(f));
    for (int i = 1; i < std::max(1, cfg.multistarts); ++i)
      starts.push_back(instantiate_perturbed(f, cfg.seed + i, 1e-3));
  } else {
    starts.push_back(instantiate_perturbed(f, cfg.seed + 1, 1e-4));
  }

  GateSetModel best;
  MinimizeReport best_rep;
  double best_val = std::numeric_limits<double>::infinity();
  for (GateSetModel& m : starts) {
    MinimizeReport rep = run_stages(cd, m, cfg, seed_model != nullptr);
    if (rep.value < best_val) {
      best_val = rep.value;
      best = m;
      best_rep = rep;
    }
  }

  FitResult out;
  out.model = best;
  Channels ch = best.channels();
  out.loglike = loglikelihood(ch, cd);
  out.lambda = -2.0 * (out.loglike - cd.log_l_max);
  out.k = 3 * static_cast<int>(cd.circuits.size()) - n_params(f);
  out.n_sigma = (out.lambda - out.k) / std::sqrt(2.0 * out.k);
  out.per_circuit_llr.reserve(cd.circuits.size());
  for (const CompiledCircuit& cc : cd.circuits) {
    auto p = circuit_probs(ch, cc);
    double llr = 0.0;
    for (int k = 0; k < 4; ++k)
      if (cc.counts[k] > 0)
        llr += 2.0 * cc.counts[k] * std::log(cc.freq[k] / p[k]);
    out.per_circuit_llr.push_back(llr);
  }
  out.diag.iterations = best_rep.iterations;
  out.diag.converged = best_rep.converged;
  out.diag.grad_norm = best_rep.grad_inf;
  out.diag.cp_violation = cp_violation_rms(ch);
  return out;
}

std::vector<FitResult> fit_nested(const Dataset& ds, const FitConfig& cfg) {
  std::vector<FitResult> out;
  out.push_back(mle_fit(Family::CrosstalkFree, ds, cfg));
  out.push_back(
      mle_fit(Family::ContextDependent, ds, cfg, &out.back().model));
  out.push_back(mle_fit(Family::General, ds, cfg, &out.back().model));
  return out;
}

BootstrapResult bootstrap_fit(const FitResult& fit, const Dataset& ds,
                              int replicates, std::uint64_t seed,
                              const FitConfig& cfg) {
  if (replicates < 1) throw ValidationError("bootstrap_fit: replicates < 1");
  Channels ch = fit.model.channels();
  BootstrapResult out;
  out.replicates.reserve(replicates);
  FitConfig rcfg = cfg;
  rcfg.multistarts = 1;
  for (int rep = 0; rep < replicates; ++rep) {
    Dataset resampled;
    resampled.rows.reserve(ds.rows.size());
    for (const DatasetRow& row : ds.rows) {
      DatasetRow r;
      r.circuit = row.circuit;
      auto p = probabilities(ch, parse_circuit(row.circuit));
      std::uint64_t key = seed ^ (0x9e3779b97f4a7c15ULL *
                                  static_cast<std::uint64_t>(rep + 1));
      for (unsigned char c : row.circuit) key = (key ^ c) * 1099511628211ULL;
      r.counts = multinomial_counts(p, row.shots(), key);
      resampled.rows.push_back(std::move(r));
    }
    FitResult rf = mle_fit(fit.model.family, resampled, rcfg, &fit.model);
    if (rf.diag.converged)
      out.replicates.push_back(std::move(rf.model));
    else
      ++out.dropped;
  }
  return out;
}

double percentile_half_width(std::vector<double> values) {
  if (values.size() < 2) return 0.0;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    double pos = q * static_cast<double>(values.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, values.size() - 1);
    double w = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - w) + values[hi] * w;
  };
  return (quantile(0.975) - quantile(0.025)) / 2.0;
}

}  // namespace xtalk
