#ifndef XTALK_SIMULATE_HPP
#define XTALK_SIMULATE_HPP

#include "xtalk/circuits.hpp"
#include "xtalk/models.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

// Forward simulation of circuit outcome distributions, multinomial sampling,
// dataset I/O (JSON Lines), aggregation, and the two-sample batch
// consistency test.

namespace xtalk {

constexpr double kProbClip = 1e-12;
constexpr const char* kOutcomeLabels[4] = {"00", "01", "10", "11"};

struct DatasetRow {
  std::string circuit;             // serialized form
  std::array<std::int64_t, 4> counts{};  // outcome order 00,01,10,11

  std::int64_t shots() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
};

struct Dataset {
  std::vector<DatasetRow> rows;
  std::uint64_t seed = 0;
  std::string model_description;
  std::string timestamp;

  const DatasetRow* find(const std::string& serialized) const;
};

// Outcome distribution for a circuit under the model's channels; clipped at
// kProbClip and renormalized. The raw (unclipped) values are available via
// probabilities_raw.
std::array<double, 4> probabilities(const Channels& ch, const Circuit& c);
std::array<double, 4> probabilities_raw(const Channels& ch, const Circuit& c);
std::array<double, 4> clip_and_renormalize(const std::array<double, 4>& raw);

// Independent multinomial draws per circuit from a per-circuit RNG substream
// keyed by (seed, serialized circuit): deterministic under any evaluation
// order.
Dataset sample(const GateSetModel& m, const std::vector<Circuit>& circuits,
               std::int64_t shots, std::uint64_t seed);
Dataset sample(const Channels& ch, const std::vector<Circuit>& circuits,
               std::int64_t shots, std::uint64_t seed);

// One multinomial draw fully determined by the key; used for parametric
// bootstrap resampling.
std::array<std::int64_t, 4> multinomial_counts(const std::array<double, 4>& p,
                                               std::int64_t shots,
                                               std::uint64_t key);

// Element-wise count sums; requires identical circuit sets.
Dataset aggregate(const std::vector<Dataset>& parts);

struct ConsistencyResult {
  std::vector<double> p_values;  // aligned with a.rows
  bool consistent = true;        // Bonferroni-corrected aggregate verdict
  double min_p = 1.0;
  double alpha = 0.05;
};

// Two-sample multinomial log-likelihood-ratio test per circuit against the
// pooled distribution, chi^2_3 reference, Bonferroni aggregate verdict.
ConsistencyResult consistency_test(const Dataset& a, const Dataset& b,
                                   double alpha);

// Dataset file: JSON Lines with a header object, then one row per circuit.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace xtalk

#endif
