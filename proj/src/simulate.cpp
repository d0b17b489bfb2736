#include "xtalk/simulate.hpp"

#include <nlohmann/json.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

namespace xtalk {

using nlohmann::json;

const DatasetRow* Dataset::find(const std::string& serialized) const {
  for (const auto& r : rows)
    if (r.circuit == serialized) return &r;
  return nullptr;
}

std::array<double, 4> probabilities_raw(const Channels& ch, const Circuit& c) {
  Vec16 state = ch.rho;
  for (const Layer& l : c.layers) state = ch.layer[l.index()] * state;
  std::array<double, 4> p;
  for (int a = 0; a < 4; ++a) p[a] = ch.effect[a].dot(state);
  return p;
}

std::array<double, 4> clip_and_renormalize(const std::array<double, 4>& raw) {
  std::array<double, 4> p;
  double total = 0.0;
  for (int a = 0; a < 4; ++a) {
    p[a] = std::max(raw[a], kProbClip);
    total += p[a];
  }
  for (int a = 0; a < 4; ++a) p[a] /= total;
  return p;
}

std::array<double, 4> probabilities(const Channels& ch, const Circuit& c) {
  return clip_and_renormalize(probabilities_raw(ch, c));
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Multinomial draw via sequential binomial-by-inversion; uses only raw
// 64-bit uniforms so results are identical across standard libraries.
std::array<std::int64_t, 4> draw_counts(const std::array<double, 4>& p,
                                        std::int64_t shots,
                                        std::mt19937_64& rng) {
  std::array<std::int64_t, 4> counts{};
  for (std::int64_t s = 0; s < shots; ++s) {
    double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    double acc = 0.0;
    int pick = 3;
    for (int a = 0; a < 4; ++a) {
      acc += p[a];
      if (u < acc) {
        pick = a;
        break;
      }
    }
    ++counts[pick];
  }
  return counts;
}

}  // namespace

std::array<std::int64_t, 4> multinomial_counts(const std::array<double, 4>& p,
                                               std::int64_t shots,
                                               std::uint64_t key) {
  std::mt19937_64 rng(splitmix(key));
  return draw_counts(p, shots, rng);
}

Dataset sample(const Channels& ch, const std::vector<Circuit>& circuits,
               std::int64_t shots, std::uint64_t seed) {
  if (shots <= 0) throw ValidationError("sample: shots must be positive");
  Dataset ds;
  ds.seed = seed;
  ds.rows.reserve(circuits.size());
  for (const Circuit& c : circuits) {
    DatasetRow row;
    row.circuit = serialize_circuit(c);
    std::mt19937_64 rng(splitmix(seed ^ fnv1a(row.circuit)));
    row.counts = draw_counts(probabilities(ch, c), shots, rng);
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

Dataset sample(const GateSetModel& m, const std::vector<Circuit>& circuits,
               std::int64_t shots, std::uint64_t seed) {
  Dataset ds = sample(m.channels(), circuits, shots, seed);
  ds.model_description = m.description;
  return ds;
}

Dataset aggregate(const std::vector<Dataset>& parts) {
  if (parts.empty()) throw ValidationError("aggregate: empty dataset list");
  Dataset out = parts[0];
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const Dataset& d = parts[k];
    if (d.rows.size() != out.rows.size())
      throw ValidationError("aggregate: circuit sets differ");
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
      if (d.rows[i].circuit != out.rows[i].circuit)
        throw ValidationError("aggregate: circuit sets differ");
      for (int a = 0; a < 4; ++a) out.rows[i].counts[a] += d.rows[i].counts[a];
    }
  }
  return out;
}

ConsistencyResult consistency_test(const Dataset& a, const Dataset& b,
                                   double alpha) {
  if (a.rows.size() != b.rows.size())
    throw ValidationError("consistency_test: circuit sets differ");
  boost::math::chi_squared chi2(3);
  ConsistencyResult res;
  res.alpha = alpha;
  res.p_values.reserve(a.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& ra = a.rows[i];
    const auto& rb = b.rows[i];
    if (ra.circuit != rb.circuit)
      throw ValidationError("consistency_test: circuit sets differ");
    const double na = static_cast<double>(ra.shots());
    const double nb = static_cast<double>(rb.shots());
    double llr = 0.0;
    for (int o = 0; o < 4; ++o) {
      double ca = static_cast<double>(ra.counts[o]);
      double cb = static_cast<double>(rb.counts[o]);
      double pooled = (ca + cb) / (na + nb);
      if (ca > 0) llr += ca * std::log((ca / na) / pooled);
      if (cb > 0) llr += cb * std::log((cb / nb) / pooled);
    }
    llr *= 2.0;
    double p = 1.0 - boost::math::cdf(chi2, std::max(llr, 0.0));
    res.p_values.push_back(p);
    res.min_p = std::min(res.min_p, p);
  }
  const double bonferroni =
      alpha / static_cast<double>(std::max<std::size_t>(a.rows.size(), 1));
  res.consistent = res.min_p >= bonferroni;
  return res;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  json header = {{"format", "xtalk-gst-dataset"},
                 {"version", 1},
                 {"seed", ds.seed},
                 {"model", ds.model_description},
                 {"timestamp", ds.timestamp}};
  f << header.dump() << '\n';
  for (const auto& r : ds.rows) {
    // Fixed key order for byte-stable files.
    f << "{\"circuit\":" << json(r.circuit).dump() << ",\"counts\":{";
    for (int a = 0; a < 4; ++a)
      f << (a ? "," : "") << '"' << kOutcomeLabels[a] << "\":" << r.counts[a];
    f << "}}\n";
  }
}

Dataset read_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  Dataset ds;
  std::string line;
  bool header = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (header) {
      if (j.value("format", "") != "xtalk-gst-dataset")
        throw ValidationError("not an xtalk-gst-dataset file: " + path);
      ds.seed = j.value("seed", std::uint64_t{0});
      ds.model_description = j.value("model", "");
      ds.timestamp = j.value("timestamp", "");
      header = false;
      continue;
    }
    DatasetRow row;
    row.circuit = j.at("circuit").get<std::string>();
    const auto& counts = j.at("counts");
    for (int a = 0; a < 4; ++a)
      row.counts[a] = counts.at(kOutcomeLabels[a]).get<std::int64_t>();
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

}  // namespace xtalk
