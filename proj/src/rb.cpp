#include "xtalk/rb.hpp"

#include "xtalk/fit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>

#include <nlohmann/json.hpp>

namespace xtalk {

namespace {

RbMode idle_mode_for(int qubit) {
  return qubit == 0 ? RbMode::Q1Idle : RbMode::Q0Idle;
}

RbMode parse_mode(const std::string& name) {
  for (RbMode m :
       {RbMode::Simultaneous, RbMode::Q0Idle, RbMode::Q1Idle})
    if (name == rb_mode_name(m)) return m;
  throw ValidationError("unknown RB mode: " + name);
}

}  // namespace

std::vector<DepthSuccess> rb_success(const Dataset& ds,
                                     const std::vector<RbCircuit>& meta,
                                     int qubit, bool spectator_driven) {
  if (qubit < 0 || qubit > 1) throw ValidationError("rb_success: bad qubit");
  const RbMode wanted =
      spectator_driven ? RbMode::Simultaneous : idle_mode_for(qubit);
  std::map<int, DepthSuccess> by_depth;
  for (const RbCircuit& rc : meta) {
    if (rc.mode != wanted) continue;
    const DatasetRow* row = ds.find(serialize_circuit(rc.circuit));
    if (!row)
      throw ValidationError("rb_success: circuit missing from dataset: " +
                            serialize_circuit(rc.circuit));
    std::int64_t shots = row->shots();
    if (shots <= 0)
      throw ValidationError("rb_success: circuit has no shots");
    const int target_bit = rc.target[qubit] - '0';
    std::int64_t hit = 0;
    for (int k = 0; k < 4; ++k) {
      int bit = qubit == 0 ? (k >> 1) : (k & 1);
      if (bit == target_bit) hit += row->counts[k];
    }
    DepthSuccess& cell = by_depth[rc.depth];
    cell.depth = rc.depth;
    cell.per_circuit.push_back(static_cast<double>(hit) /
                               static_cast<double>(shots));
    cell.shots.push_back(static_cast<double>(shots));
  }
  std::vector<DepthSuccess> out;
  for (auto& [depth, cell] : by_depth) {
    double sum = 0.0;
    for (double v : cell.per_circuit) sum += v;
    cell.mean = sum / static_cast<double>(cell.per_circuit.size());
    out.push_back(std::move(cell));
  }
  if (out.empty())
    throw ValidationError("rb_success: no circuits for requested context");
  return out;
}

namespace {

// Weighted SSE of A + B p^d with (A, B) at their constrained least-squares
// optimum for this p.
double decay_sse(const std::vector<double>& depths,
                 const std::vector<double>& successes,
                 const std::vector<double>& weights, double p, double& a,
                 double& b) {
  // Linear weighted least squares in (a, b) against basis {1, p^d}.
  double s_w = 0, s_x = 0, s_xx = 0, s_y = 0, s_xy = 0;
  const int n = static_cast<int>(depths.size());
  for (int i = 0; i < n; ++i) {
    double x = std::pow(p, depths[i]);
    double w = weights[i];
    s_w += w;
    s_x += w * x;
    s_xx += w * x * x;
    s_y += w * successes[i];
    s_xy += w * x * successes[i];
  }
  double det = s_w * s_xx - s_x * s_x;
  if (std::abs(det) > 1e-12 * s_w * s_w) {
    a = (s_xx * s_y - s_x * s_xy) / det;
    b = (s_w * s_xy - s_x * s_y) / det;
  } else {  // p^d constant over the data; intercept only
    a = s_y / s_w;
    b = 0.0;
  }
  a = std::clamp(a, 0.0, 1.0);
  b = std::clamp(b, -1.0, 1.0);
  // One exchange re-solve after clamping keeps the active coordinate
  // optimal given the clamped one.
  if (s_xx > 0) b = std::clamp((s_xy - a * s_x) / s_xx, -1.0, 1.0);
  a = std::clamp((s_y - b * s_x) / s_w, 0.0, 1.0);
  double sse = 0.0;
  for (int i = 0; i < n; ++i) {
    double r = successes[i] - a - b * std::pow(p, depths[i]);
    sse += weights[i] * r * r;
  }
  return sse;
}

}  // namespace

void fit_decay(const std::vector<double>& depths,
               const std::vector<double>& successes,
               const std::vector<double>& weights, double& a, double& b,
               double& p) {
  if (depths.size() != successes.size() || depths.size() != weights.size())
    throw ValidationError("fit_decay: length mismatch");
  std::vector<double> distinct = depths;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  if (distinct.size() < 3)
    throw ValidationError("fit_decay: need at least 3 distinct depths");

  double best_p = 0.0, best_sse = std::numeric_limits<double>::infinity();
  double ta, tb;
  for (int i = 0; i <= 500; ++i) {
    double trial = static_cast<double>(i) / 500.0;
    double sse = decay_sse(depths, successes, weights, trial, ta, tb);
    if (sse < best_sse) {
      best_sse = sse;
      best_p = trial;
    }
  }
  double lo = std::max(0.0, best_p - 0.002);
  double hi = std::min(1.0, best_p + 0.002);
  for (int it = 0; it < 60; ++it) {
    double t1 = lo + (hi - lo) / 3.0, t2 = hi - (hi - lo) / 3.0;
    if (decay_sse(depths, successes, weights, t1, ta, tb) <
        decay_sse(depths, successes, weights, t2, ta, tb))
      hi = t2;
    else
      lo = t1;
  }
  p = 0.5 * (lo + hi);
  decay_sse(depths, successes, weights, p, a, b);
}

namespace {

DecayFit fit_cell(const std::vector<DepthSuccess>& depths,
                  std::uint64_t seed, int replicates) {
  auto flatten = [&](const std::vector<DepthSuccess>& cells) {
    std::vector<double> d, s, w;
    for (const DepthSuccess& cell : cells)
      for (std::size_t i = 0; i < cell.per_circuit.size(); ++i) {
        d.push_back(static_cast<double>(cell.depth));
        s.push_back(cell.per_circuit[i]);
        w.push_back(cell.shots[i]);
      }
    return std::make_tuple(d, s, w);
  };

  DecayFit fit;
  auto [d, s, w] = flatten(depths);
  fit_decay(d, s, w, fit.a, fit.b, fit.p);
  fit.r = (1.0 - fit.p) / 2.0;

  // Nonparametric bootstrap: resample circuits within each depth.
  std::mt19937_64 rng(seed ^ 0x52b2a9d7c36fULL);
  std::vector<double> as, bs, ps;
  for (int rep = 0; rep < replicates; ++rep) {
    std::vector<DepthSuccess> resampled = depths;
    for (std::size_t c = 0; c < resampled.size(); ++c) {
      const DepthSuccess& src = depths[c];
      std::uniform_int_distribution<std::size_t> pick(
          0, src.per_circuit.size() - 1);
      for (std::size_t i = 0; i < resampled[c].per_circuit.size(); ++i) {
        std::size_t j = pick(rng);
        resampled[c].per_circuit[i] = src.per_circuit[j];
        resampled[c].shots[i] = src.shots[j];
      }
    }
    auto [rd, rs, rw] = flatten(resampled);
    double ra, rb, rp;
    try {
      fit_decay(rd, rs, rw, ra, rb, rp);
    } catch (const ValidationError&) {
      continue;
    }
    as.push_back(ra);
    bs.push_back(rb);
    ps.push_back(rp);
  }
  fit.a_hw = percentile_half_width(as);
  fit.b_hw = percentile_half_width(bs);
  fit.p_hw = percentile_half_width(ps);
  std::vector<double> rs_vals;
  rs_vals.reserve(ps.size());
  for (double pv : ps) rs_vals.push_back((1.0 - pv) / 2.0);
  fit.r_hw = percentile_half_width(rs_vals);
  return fit;
}

}  // namespace

RBResult analyze_rb(const Dataset& ds, const std::vector<RbCircuit>& meta,
                    std::uint64_t seed, int replicates) {
  RBResult res;
  int cell_index = 0;
  for (int q = 0; q < 2; ++q)
    for (bool driven : {false, true}) {
      RbCell cell;
      cell.qubit = q;
      cell.spectator_driven = driven;
      cell.depths = rb_success(ds, meta, q, driven);
      cell.fit = fit_cell(cell.depths, seed + 1315423911u * ++cell_index,
                          replicates);
      res.cells.push_back(std::move(cell));
    }
  return res;
}

ContextVariation context_variation_rb(const RBResult& res, int qubit) {
  const RbCell* idle = nullptr;
  const RbCell* driven = nullptr;
  for (const RbCell& c : res.cells) {
    if (c.qubit != qubit) continue;
    (c.spectator_driven ? driven : idle) = &c;
  }
  if (!idle || !driven)
    throw ValidationError("context_variation_rb: missing context fits");
  ContextVariation v;
  v.value = driven->fit.r - idle->fit.r;
  // Contexts are fitted on disjoint circuits, so the bootstrap spreads add
  // in quadrature.
  v.half_width = std::hypot(driven->fit.r_hw, idle->fit.r_hw);
  return v;
}

void write_rb_metadata(const std::vector<RbCircuit>& meta,
                       const std::string& path) {
  nlohmann::json rows = nlohmann::json::array();
  for (const RbCircuit& rc : meta)
    rows.push_back({{"circuit", serialize_circuit(rc.circuit)},
                    {"mode", rb_mode_name(rc.mode)},
                    {"depth", rc.depth},
                    {"target", rc.target}});
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + tmp);
    out << rows.dump(2) << "\n";
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ValidationError("cannot rename " + tmp + " to " + path);
}

std::vector<RbCircuit> read_rb_metadata(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  nlohmann::json rows = nlohmann::json::parse(in);
  std::vector<RbCircuit> meta;
  for (const auto& row : rows) {
    RbCircuit rc;
    rc.circuit = parse_circuit(row.at("circuit").get<std::string>());
    rc.mode = parse_mode(row.at("mode").get<std::string>());
    rc.depth = row.at("depth").get<int>();
    rc.target = row.at("target").get<std::string>();
    meta.push_back(std::move(rc));
  }
  return meta;
}

}  // namespace xtalk
