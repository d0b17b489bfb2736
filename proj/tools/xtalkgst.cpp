// xtalkgst: crosstalk characterization pipeline.
//
//   design    emit the GST experiment design
//   simulate  sample a dataset from a model
//   fit       maximum-likelihood fits of the model families
//   select    evidence-ratio model selection over a fit fragment
//   wildcard  wildcard error of one fitted family
//   rb        simultaneous randomized benchmarking analysis
//   report    report.json plus SVG figures from the artifacts above
//
// Exit codes: 0 success, 2 validation error, 3 non-convergence, 4 I/O.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xtalk/report.hpp"

using namespace xtalk;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct RunConfig {
  std::string config_path;
  std::string model_path, design_path, dataset_path, fits_path, rb_path,
      metadata_path, out_path;
  int lmax = 8;
  std::int64_t shots = 1000;
  std::optional<std::uint64_t> seed;
  std::string family = "all";
  double alpha = 0.05;
  double gamma_threshold = 2.0;
  int bootstrap = 0;
  int replicates = 200;
  std::string depths = "1,2,4,8,16,32,64";
  int per_depth = 10;
};

// Flags override the config file: only options the user did not pass on the
// command line are filled in from JSON.
void apply_config(CLI::App* cmd, RunConfig& rc) {
  if (rc.config_path.empty()) return;
  json cfg = json::parse(read_text(rc.config_path));
  auto fill = [&](const char* flag, auto& slot) {
    CLI::Option* opt = cmd->get_option_no_throw(flag);
    std::string key = std::string(flag).substr(2);
    if (opt && opt->count() == 0 && cfg.contains(key))
      slot = cfg.at(key)
                 .get<typename std::remove_reference_t<decltype(slot)>>();
  };
  fill("--model", rc.model_path);
  fill("--design", rc.design_path);
  fill("--dataset", rc.dataset_path);
  fill("--fits", rc.fits_path);
  fill("--rb", rc.rb_path);
  fill("--metadata", rc.metadata_path);
  fill("--out", rc.out_path);
  fill("--lmax", rc.lmax);
  fill("--shots", rc.shots);
  fill("--family", rc.family);
  fill("--alpha", rc.alpha);
  fill("--gamma-threshold", rc.gamma_threshold);
  fill("--bootstrap", rc.bootstrap);
  fill("--replicates", rc.replicates);
  fill("--depths", rc.depths);
  fill("--per-depth", rc.per_depth);
  CLI::Option* seed_opt = cmd->get_option_no_throw("--seed");
  if (seed_opt && seed_opt->count() == 0 && cfg.contains("seed"))
    rc.seed = cfg.at("seed").get<std::uint64_t>();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

void require_readable(const std::string& path, const std::string& what) {
  require(!path.empty(), "missing required input: " + what);
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + what + ": " + path);
}

std::uint64_t require_seed(const RunConfig& rc) {
  require(rc.seed.has_value(), "--seed is mandatory for this command");
  return *rc.seed;
}

std::vector<int> parse_depths(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  require(!out.empty(), "--depths must list at least one depth");
  return out;
}

json config_echo(const RunConfig& rc, const std::string& command) {
  json j;
  j["command"] = command;
  j["lmax"] = rc.lmax;
  j["shots"] = rc.shots;
  if (rc.seed)
    j["seed"] = *rc.seed;
  else
    j["seed"] = nullptr;
  j["family"] = rc.family;
  j["alpha"] = rc.alpha;
  j["gamma_threshold"] = rc.gamma_threshold;
  j["bootstrap"] = rc.bootstrap;
  return j;
}

json provenance(const std::vector<std::pair<std::string, std::string>>& ins) {
  json hashes = json::object();
  for (const auto& [label, path] : ins)
    if (!path.empty()) hashes[label] = content_hash(read_text(path));
  return json{{"tool_version", kToolVersion}, {"input_hashes", hashes}};
}

void write_json_atomic(const std::string& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

int cmd_design(const RunConfig& rc) {
  require(!rc.out_path.empty(), "--out is required");
  write_design(build_gst_design(rc.lmax), rc.out_path);
  std::cout << "wrote " << rc.out_path << "\n";
  return 0;
}

int cmd_simulate(const RunConfig& rc) {
  require_readable(rc.model_path, "--model");
  require_readable(rc.design_path, "--design");
  require(!rc.out_path.empty(), "--out is required");
  std::uint64_t seed = require_seed(rc);
  GateSetModel m = read_model(rc.model_path);
  ExperimentDesign design = read_design(rc.design_path);
  Dataset ds = sample(m, design.circuits, rc.shots, seed);
  write_dataset(ds, rc.out_path);
  std::cout << "wrote " << rc.out_path << " (" << ds.rows.size()
            << " circuits x " << rc.shots << " shots)\n";
  return 0;
}

int cmd_fit(const RunConfig& rc) {
  require_readable(rc.dataset_path, "--dataset");
  require(!rc.out_path.empty(), "--out is required");
  Dataset ds = read_dataset(rc.dataset_path);
  FitConfig cfg;
  if (rc.seed) cfg.seed = *rc.seed;
  cfg.bootstrap_replicates = rc.bootstrap;

  std::vector<FitResult> fits;
  if (rc.family == "all") {
    fits = fit_nested(ds, cfg);
  } else {
    fits.push_back(mle_fit(family_from_name(rc.family), ds, cfg));
  }
  json frag = fit_fragment_json(fits);
  frag["config"] = config_echo(rc, "fit");
  frag["provenance"] = provenance({{"dataset", rc.dataset_path}});
  write_json_atomic(rc.out_path, frag);

  bool all_converged = true;
  for (const FitResult& f : fits) {
    std::cout << family_name(f.model.family) << ": lambda = " << f.lambda
              << ", k = " << f.k << ", n_sigma = " << f.n_sigma
              << (f.diag.converged ? "" : "  [NOT CONVERGED]") << "\n";
    all_converged = all_converged && f.diag.converged;
  }
  std::cout << "wrote " << rc.out_path << "\n";
  return all_converged ? 0 : 3;
}

std::vector<FitResult> load_fits(const RunConfig& rc) {
  require_readable(rc.fits_path, "--fits");
  return fits_from_fragment(json::parse(read_text(rc.fits_path)));
}

int cmd_select(const RunConfig& rc) {
  std::vector<FitResult> fits = load_fits(rc);
  require(fits.size() == 3,
          "select needs a fragment with all three families (fit --family all)");
  SelectionResult sel = select_model(fits, rc.gamma_threshold);
  json out;
  out["selected"] = family_name(sel.selected);
  out["gamma_cd_over_cf"] = scalar_json(sel.gamma_cd_over_cf);
  out["gamma_gen_over_cd"] = scalar_json(sel.gamma_gen_over_cd);
  out["threshold"] = sel.threshold;
  out["rule"] = sel.rule;
  out["config"] = config_echo(rc, "select");
  out["provenance"] = provenance({{"fits", rc.fits_path}});
  std::cout << sel.rule << "\n";
  if (!rc.out_path.empty()) {
    write_json_atomic(rc.out_path, out);
    std::cout << "wrote " << rc.out_path << "\n";
  }
  return 0;
}

int cmd_wildcard(const RunConfig& rc) {
  require_readable(rc.dataset_path, "--dataset");
  std::vector<FitResult> fits = load_fits(rc);
  Dataset ds = read_dataset(rc.dataset_path);
  json out = json::array();
  for (const FitResult& f : fits) {
    if (rc.family != "all" &&
        f.model.family != family_from_name(rc.family))
      continue;
    WildcardResult w = wildcard_fit(f, ds, rc.alpha);
    json j;
    j["family"] = family_name(f.model.family);
    j["w"] = scalar_json(w.w);
    j["consistent_at_zero"] = w.consistent_at_zero;
    j["lambda_relaxed"] = w.lambda_relaxed;
    j["lambda_threshold"] = w.lambda_threshold;
    j["worst_circuit_llr"] = w.worst_circuit_llr;
    j["circuit_threshold"] = w.circuit_threshold;
    out.push_back(std::move(j));
    std::cout << family_name(f.model.family) << ": W = " << w.w << "\n";
  }
  require(!out.empty(), "no fit in the fragment matches --family");
  json doc;
  doc["wildcard"] = out;
  doc["config"] = config_echo(rc, "wildcard");
  doc["provenance"] = provenance(
      {{"fits", rc.fits_path}, {"dataset", rc.dataset_path}});
  if (!rc.out_path.empty()) {
    write_json_atomic(rc.out_path, doc);
    std::cout << "wrote " << rc.out_path << "\n";
  }
  return 0;
}

int cmd_rb(const RunConfig& rc) {
  require(!rc.out_path.empty(), "--out is required");
  std::uint64_t seed = require_seed(rc);
  Dataset ds;
  std::vector<RbCircuit> meta;
  if (!rc.dataset_path.empty()) {
    require_readable(rc.dataset_path, "--dataset");
    require_readable(rc.metadata_path, "--metadata");
    ds = read_dataset(rc.dataset_path);
    meta = read_rb_metadata(rc.metadata_path);
  } else {
    require_readable(rc.model_path, "--model");
    GateSetModel m = read_model(rc.model_path);
    std::vector<int> depths = parse_depths(rc.depths);
    std::uint64_t circuit_seed = seed;
    for (RbMode mode :
         {RbMode::Simultaneous, RbMode::Q0Idle, RbMode::Q1Idle}) {
      auto part =
          sample_rb_circuits(depths, rc.per_depth, mode, circuit_seed++);
      meta.insert(meta.end(), part.begin(), part.end());
    }
    std::vector<Circuit> circs;
    for (const RbCircuit& m_rc : meta) circs.push_back(m_rc.circuit);
    ds = sample(m, circs, rc.shots, seed + 0x9e3779b9u);
    if (!rc.metadata_path.empty()) write_rb_metadata(meta, rc.metadata_path);
  }
  RBResult res = analyze_rb(ds, meta, seed, rc.replicates);
  json doc = rb_json(res);
  for (int q = 0; q < 2; ++q) {
    ContextVariation v = context_variation_rb(res, q);
    doc["context_variation"]["q" + std::to_string(q)] =
        scalar_json(v.value, v.half_width);
  }
  doc["config"] = config_echo(rc, "rb");
  doc["provenance"] = provenance({{"model", rc.model_path},
                                  {"dataset", rc.dataset_path},
                                  {"metadata", rc.metadata_path}});
  write_json_atomic(rc.out_path, doc);
  for (const RbCell& c : res.cells)
    std::cout << "qubit " << c.qubit
              << (c.spectator_driven ? " driven" : " idle  ")
              << ": r = " << c.fit.r << " +/- " << c.fit.r_hw << "\n";
  std::cout << "wrote " << rc.out_path << "\n";
  return 0;
}

int cmd_report(const RunConfig& rc) {
  require_readable(rc.fits_path, "--fits");
  require_readable(rc.dataset_path, "--dataset");
  require(!rc.out_path.empty(), "--out directory is required");
  std::vector<FitResult> fits = load_fits(rc);
  require(fits.size() == 3,
          "report needs a fragment with all three families (fit --family all)");
  Dataset ds = read_dataset(rc.dataset_path);

  ComparisonReport cmp = compare_models(fits, ds, rc.alpha,
                                        rc.gamma_threshold);
  const FitResult* selected = &fits[0];
  for (const FitResult& f : fits)
    if (f.model.family == cmp.selection.selected) selected = &f;
  std::vector<GateErrorReport> gates = gate_error_reports(selected->model);

  json report;
  report["version"] = kToolVersion;
  report["config"] = config_echo(rc, "report");
  report["comparison"] = comparison_json(cmp);
  report["selected_model_gate_errors"] = gate_errors_json(gates);
  std::vector<std::pair<std::string, std::string>> inputs{
      {"fits", rc.fits_path}, {"dataset", rc.dataset_path}};

  const std::string dir = rc.out_path;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  write_text_atomic(dir + "/comparison_table.svg", comparison_table_svg(cmp));
  write_text_atomic(dir + "/hamiltonian_arrows.svg",
                    hamiltonian_arrows_svg(gates));
  if (!rc.rb_path.empty()) {
    require_readable(rc.rb_path, "--rb");
    json rbdoc = json::parse(read_text(rc.rb_path));
    report["rb"] = rbdoc;
    inputs.emplace_back("rb", rc.rb_path);
    // Rebuild the decay figure from the stored per-depth values.
    RBResult res;
    for (const auto& cell : rbdoc.at("cells")) {
      RbCell c;
      c.qubit = cell.at("qubit").get<int>();
      c.spectator_driven = cell.at("spectator_driven").get<bool>();
      c.fit.a = cell.at("a").at("value").get<double>();
      c.fit.b = cell.at("b").at("value").get<double>();
      c.fit.p = cell.at("p").at("value").get<double>();
      c.fit.r = cell.at("r").at("value").get<double>();
      c.fit.r_hw = cell.at("r").at("half_width").get<double>();
      for (const auto& d : cell.at("depths")) {
        DepthSuccess s;
        s.depth = d.at("depth").get<int>();
        s.mean = d.at("mean").get<double>();
        s.per_circuit = d.at("per_circuit").get<std::vector<double>>();
        c.depths.push_back(std::move(s));
      }
      res.cells.push_back(std::move(c));
    }
    write_text_atomic(dir + "/decay_curves.svg", decay_curves_svg(res));
  } else {
    report["rb"] = nullptr;
  }
  report["provenance"] = provenance(inputs);
  write_json_atomic(dir + "/report.json", report);
  std::cout << "wrote " << dir << "/report.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crosstalk characterization via nested gate-set tomography"};
  app.require_subcommand(1);
  RunConfig rc;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", rc.config_path,
                    "JSON config mirroring the long flags; flags override");
    cmd->add_option("--out", rc.out_path, "output path");
    cmd->add_option("--seed", rc.seed, "RNG seed");
    return cmd;
  };

  CLI::App* design = add_common(app.add_subcommand(
      "design", "emit the GST experiment design"));
  design->add_option("--lmax", rc.lmax, "maximum germ power length");

  CLI::App* simulate = add_common(app.add_subcommand(
      "simulate", "sample a dataset from a model"));
  simulate->add_option("--model", rc.model_path, "model JSON");
  simulate->add_option("--design", rc.design_path, "design file");
  simulate->add_option("--shots", rc.shots, "shots per circuit");

  CLI::App* fit = add_common(app.add_subcommand(
      "fit", "maximum-likelihood fits"));
  fit->add_option("--dataset", rc.dataset_path, "dataset JSONL");
  fit->add_option("--family", rc.family,
                  "crosstalk-free | context-dependent | general | all");
  fit->add_option("--bootstrap", rc.bootstrap, "bootstrap replicates");

  CLI::App* select = add_common(app.add_subcommand(
      "select", "evidence-ratio model selection"));
  select->add_option("--fits", rc.fits_path, "fit fragment JSON");
  select->add_option("--gamma-threshold", rc.gamma_threshold,
                     "per-parameter evidence threshold");

  CLI::App* wildcard = add_common(app.add_subcommand(
      "wildcard", "wildcard error of fitted families"));
  wildcard->add_option("--fits", rc.fits_path, "fit fragment JSON");
  wildcard->add_option("--dataset", rc.dataset_path, "dataset JSONL");
  wildcard->add_option("--family", rc.family, "family filter or all");
  wildcard->add_option("--alpha", rc.alpha, "per-circuit test level");

  CLI::App* rb = add_common(app.add_subcommand(
      "rb", "simultaneous randomized benchmarking"));
  rb->add_option("--model", rc.model_path, "model JSON (simulate mode)");
  rb->add_option("--dataset", rc.dataset_path, "dataset JSONL (analyze mode)");
  rb->add_option("--metadata", rc.metadata_path, "RB circuit metadata JSON");
  rb->add_option("--shots", rc.shots, "shots per circuit");
  rb->add_option("--depths", rc.depths, "comma-separated RB depths");
  rb->add_option("--per-depth", rc.per_depth, "random circuits per depth");
  rb->add_option("--replicates", rc.replicates, "bootstrap replicates");

  CLI::App* report = add_common(app.add_subcommand(
      "report", "assemble report.json and SVG figures"));
  report->add_option("--fits", rc.fits_path, "fit fragment JSON");
  report->add_option("--dataset", rc.dataset_path, "dataset JSONL");
  report->add_option("--rb", rc.rb_path, "rb result JSON");
  report->add_option("--alpha", rc.alpha, "per-circuit test level");
  report->add_option("--gamma-threshold", rc.gamma_threshold,
                     "per-parameter evidence threshold");

  try {
    app.parse(argc, argv);
    CLI::App* cmd = app.get_subcommands().front();
    apply_config(cmd, rc);
    if (cmd == design) return cmd_design(rc);
    if (cmd == simulate) return cmd_simulate(rc);
    if (cmd == fit) return cmd_fit(rc);
    if (cmd == select) return cmd_select(rc);
    if (cmd == wildcard) return cmd_wildcard(rc);
    if (cmd == rb) return cmd_rb(rc);
    if (cmd == report) return cmd_report(rc);
    throw ValidationError("unknown command");
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 4;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
