#ifndef XTALK_REPORT_HPP
#define XTALK_REPORT_HPP

#include "xtalk/errorgen.hpp"
#include "xtalk/rb.hpp"
#include "xtalk/select.hpp"

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

// Report assembly: JSON fragments with explicit uncertainty on every
// numeric, deterministic SVG figures, and atomic file writes.

namespace xtalk {

// {"value": v, "half_width": hw or null}: every reported numeric carries
// its uncertainty or an explicit null.
nlohmann::json scalar_json(double value,
                           std::optional<double> half_width = std::nullopt);

// Per-qubit gate error reports for all 9 layers: gate "Gxpi2" on qubit 0 in
// context "q1:Gi" and so on; Hamiltonian and stochastic coefficients come
// from the layer-channel decomposition restricted to the qubit's sector.
// Optional bootstrap replicate models supply percentile half-widths.
std::vector<GateErrorReport> gate_error_reports(
    const GateSetModel& m,
    const std::vector<GateSetModel>* replicates = nullptr);

// The two-qubit coupling coefficient (e.g. "ZZ") of one layer's error
// generator, in radians; the idle-layer ZZ rate of the general model is the
// quantity the threshold study tracks.
double layer_coupling_coefficient(const GateSetModel& m, const Layer& layer,
                                  const std::string& pauli);

nlohmann::json comparison_json(const ComparisonReport& rep);
nlohmann::json gate_errors_json(const std::vector<GateErrorReport>& reports);
nlohmann::json rb_json(const RBResult& res);
nlohmann::json fit_fragment_json(const std::vector<FitResult>& fits);
std::vector<FitResult> fits_from_fragment(const nlohmann::json& fragment);

// Deterministic figures: fixed viewboxes, fixed-precision coordinates,
// element order independent of map/hash iteration.
std::string decay_curves_svg(const RBResult& res);
std::string hamiltonian_arrows_svg(const std::vector<GateErrorReport>& reports);
std::string comparison_table_svg(const ComparisonReport& rep);

// Well-formedness check used by the test suite: tags balance, attributes
// are quoted, exactly one root element.
bool svg_is_well_formed(const std::string& svg);

// Write-temp-then-rename; throws IoError on failure.
void write_text_atomic(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

// FNV-1a 64-bit content hash, hex-encoded; recorded as input provenance.
std::string content_hash(const std::string& bytes);

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace xtalk

#endif
