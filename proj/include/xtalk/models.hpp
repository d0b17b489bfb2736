#ifndef XTALK_MODELS_HPP
#define XTALK_MODELS_HPP

#include "xtalk/circuits.hpp"
#include "xtalk/superop.hpp"

#include <array>
#include <cstdint>
#include <string>

// The three nested model families: crosstalk-free (86 parameters),
// context-dependent (230), general (2223). Gates are TP-constrained linear
// maps (rows below the first are free); SPAM is one free effect per qubit
// (factored families) or 3 free effects (general), the last effect fixed by
// completeness. CP is not structural; the fitter penalizes violations.

namespace xtalk {

enum class Family { CrosstalkFree = 0, ContextDependent = 1, General = 2 };

const char* family_name(Family f);
Family family_from_name(const std::string& name);
int n_params(Family f);
bool family_nested_in(Family small, Family large);

using Mat16 = Eigen::Matrix<double, 16, 16>;
using Vec16 = Eigen::Matrix<double, 16, 1>;
using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;

// Assembled maps: the 9 layer channels (index 3*q0gate + q1gate), the state,
// and the 4 POVM effects in outcome order 00,01,10,11.
struct Channels {
  std::array<Mat16, 9> layer;
  Vec16 rho;
  std::array<Vec16, 4> effect;
};

struct ChannelsAdjoint {
  std::array<Mat16, 9> layer;
  Vec16 rho;
  std::array<Vec16, 4> effect;
  void set_zero();
};

struct GateSetModel {
  Family family = Family::CrosstalkFree;
  Eigen::VectorXd theta;
  std::uint64_t seed = 0;
  std::string description;

  Channels channels() const;
  ProcessMatrix layer_channel(const Layer& l) const;
};

GateSetModel instantiate_ideal(Family f);
GateSetModel instantiate_perturbed(Family f, std::uint64_t seed, double scale);

// CPTP ground truth for simulation studies: ideal gates composed with small
// seeded coherent errors (radians) and Pauli-stochastic rates, strictly
// inside the CP cone when stochastic_scale > 0. SPAM stays ideal. The
// plain perturbed model adds Gaussian noise to raw matrix entries and is
// generally not CP, which makes it unsuitable as a data-generating truth.
GateSetModel instantiate_noisy(Family f, std::uint64_t seed,
                               double coherent_scale, double stochastic_scale);

// Larger-family model with identical predictions on every circuit.
GateSetModel embed(const GateSetModel& m, Family larger);

// General model matching the given channels exactly (requires TP inputs).
GateSetModel general_from_channels(const Channels& ch);

// Chain rule theta <- channels: accumulates d(objective)/d(theta) given the
// adjoint of the assembled channels at the model's current theta.
void accumulate_theta_grad(const GateSetModel& m, const ChannelsAdjoint& adj,
                           Eigen::VectorXd& grad);

// Model JSON: {"family":..., "theta":[...], "metadata":{...}}.
std::string model_to_json(const GateSetModel& m);
GateSetModel model_from_json_text(const std::string& text);
void write_model(const GateSetModel& m, const std::string& path);
GateSetModel read_model(const std::string& path);

// Ground-truth noise models for simulation: errorgen coefficient schema,
// {"format":"xtalk-errorgen-model","all_layers":{"ham":{"ZZ":eps_half}},
//  "layers":{"Gxpi2:Gi":{"ham":{...},"sto":{...}}}}. Coefficients add to the
// ideal layer Hamiltonian; result is returned as a general model.
GateSetModel errorgen_model_from_json_text(const std::string& text);
GateSetModel read_any_model(const std::string& path);

// Layer label "g0:g1", e.g. "Gxpi2:Gi".
std::string layer_label(const Layer& l);
Layer layer_from_label(const std::string& label);

}  // namespace xtalk

#endif
