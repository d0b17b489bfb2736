#ifndef XTALK_CIRCUITS_HPP
#define XTALK_CIRCUITS_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Circuit grammar, GST experiment-design generation, and the simplified
// simultaneous-RB circuit sampler.
//
// Grammar:  circuit := layer* ; layer := "[" gate ("," gate)* "]" ;
//           gate := name ":" qubit ; name := "Gi" | "Gxpi2" | "Gypi2" ;
//           qubit := "0" | "1"
// A qubit not mentioned in a layer defaults to Gi.

namespace xtalk {

enum class Gate : std::uint8_t { I = 0, X = 1, Y = 2 };

const char* gate_name(Gate g);

struct Layer {
  Gate q0 = Gate::I;
  Gate q1 = Gate::I;

  // Index into the 9-layer set, 3 * q0 + q1.
  int index() const { return 3 * static_cast<int>(q0) + static_cast<int>(q1); }
  bool operator==(const Layer&) const = default;
};

// Structure tags for GST circuits: [prep fiducial][germ^reps][meas fiducial].
struct GstStructure {
  int prep_len = 0;
  int germ_len = 0;  // length of one germ repetition
  int reps = 0;
  int meas_len = 0;
  int germ_id = -1;
};

struct Circuit {
  std::vector<Layer> layers;
  std::optional<GstStructure> gst;

  int depth() const { return static_cast<int>(layers.size()); }
  bool operator==(const Circuit& o) const { return layers == o.layers; }
};

struct ParseError : std::invalid_argument {
  std::size_t offset;
  ParseError(const std::string& what, std::size_t off)
      : std::invalid_argument(what), offset(off) {}
};

Circuit parse_circuit(const std::string& text);
std::string serialize_circuit(const Circuit& c);

// The fixed fiducial and germ lists: 16 preparation fiducials, 25 germs,
// 11 measurement fiducials. Qubit 0 plays the role of qubit j.
const std::vector<Circuit>& prep_fiducials();
const std::vector<Circuit>& germs();
const std::vector<Circuit>& meas_fiducials();

struct ExperimentDesign {
  std::vector<Circuit> circuits;  // deduplicated, deterministic order
  int lmax = 0;
  std::string provenance;
};

// Full cross product prep x germ^n x meas with n = floor(L/len(germ)) for
// L in {1,2,4,...,lmax}, n = 0 included (fiducial-pair circuits),
// deduplicated by serialized form. lmax must be a power of two.
ExperimentDesign build_gst_design(int lmax);

enum class RbMode { Simultaneous, Q0Idle, Q1Idle };

const char* rb_mode_name(RbMode m);

struct RbCircuit {
  Circuit circuit;
  RbMode mode;
  int depth = 0;               // number of random layers, excludes inversion
  std::string target;          // expected outcome, e.g. "10"
};

// Simplified simultaneous RB: d random layers (idling qubits per mode hold
// Gi), then a per-qubit inversion word over {Gxpi2, Gypi2} of length <= 6
// that returns each qubit to a computational basis state.
std::vector<RbCircuit> sample_rb_circuits(const std::vector<int>& depths,
                                          int per_depth, RbMode mode,
                                          std::uint64_t seed);

// Deterministic seeded shuffle of the union of designs, multiplicity kept.
std::vector<Circuit> interleave(const std::vector<std::vector<Circuit>>& designs,
                                std::uint64_t seed);

// Plain-text design file: one serialized circuit per line, LF endings.
void write_design(const ExperimentDesign& d, const std::string& path);
ExperimentDesign read_design(const std::string& path);

}  // namespace xtalk

#endif
