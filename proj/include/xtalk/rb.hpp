#ifndef XTALK_RB_HPP
#define XTALK_RB_HPP

#include "xtalk/circuits.hpp"
#include "xtalk/simulate.hpp"

#include <cstdint>
#include <string>
#include <vector>

// Simultaneous-RB analysis: per-qubit marginal success fractions, P(d) =
// A + B p^d decay fits with bootstrap half-widths, error-per-gate
// r = (1 - p)/2 (single-qubit marginal convention), and the
// context-to-context variation r_driven - r_idle.

namespace xtalk {

// Success fractions of the circuits at one depth in one (qubit, context)
// cell; per-circuit values kept for violin-style rendering and bootstrap.
struct DepthSuccess {
  int depth = 0;
  std::vector<double> per_circuit;  // marginal success fraction per circuit
  std::vector<double> shots;        // aligned with per_circuit
  double mean = 0.0;
};

struct DecayFit {
  double a = 0.0, b = 0.0, p = 0.0;  // P(d) = a + b p^d
  double a_hw = 0.0, b_hw = 0.0, p_hw = 0.0;
  double r = 0.0;  // (1 - p) / 2
  double r_hw = 0.0;
};

// One (qubit, context) cell. Context: the spectator qubit either idles
// (mode QxIdle) or is driven with its own random sequence (Simultaneous).
struct RbCell {
  int qubit = 0;
  bool spectator_driven = false;
  std::vector<DepthSuccess> depths;
  DecayFit fit;
};

struct RBResult {
  std::vector<RbCell> cells;  // (q0 idle, q0 driven, q1 idle, q1 driven)
};

struct ContextVariation {
  double value = 0.0;  // r_driven - r_idle; may be negative
  double half_width = 0.0;
};

// Per-depth per-circuit marginal success fractions for one qubit over the
// circuits of the metadata whose mode matches the requested context.
// Throws when a metadata circuit is missing from the dataset.
std::vector<DepthSuccess> rb_success(const Dataset& ds,
                                     const std::vector<RbCircuit>& meta,
                                     int qubit, bool spectator_driven);

// Weighted nonlinear least squares for A + B p^d with A in [0,1],
// B in [-1,1], p in [0,1]; A and B are solved linearly for trial p, and p
// by a deterministic coarse-grid plus golden-section refinement. Requires
// at least 3 distinct depths.
void fit_decay(const std::vector<double>& depths,
               const std::vector<double>& successes,
               const std::vector<double>& weights, double& a, double& b,
               double& p);

// Fit every (qubit, context) cell and attach bootstrap half-widths
// (resampling circuits within each depth, `replicates` refits).
RBResult analyze_rb(const Dataset& ds, const std::vector<RbCircuit>& meta,
                    std::uint64_t seed, int replicates = 200);

ContextVariation context_variation_rb(const RBResult& res, int qubit);

// Sidecar JSON mapping each serialized circuit to {mode, depth, target}.
void write_rb_metadata(const std::vector<RbCircuit>& meta,
                       const std::string& path);
std::vector<RbCircuit> read_rb_metadata(const std::string& path);

}  // namespace xtalk

#endif
