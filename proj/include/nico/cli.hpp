#pragma once

// Command-line front end. dispatch() is the whole program; tools/nico.cpp
// only forwards argv.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <nlohmann/json.hpp>

#include "nico/em.hpp"
#include "nico/evalmetrics.hpp"
#include "nico/experiments.hpp"
#include "nico/fm.hpp"
#include "nico/io.hpp"
#include "nico/reconstruct.hpp"
#include "nico/sampler.hpp"
#include "nico/simgen.hpp"

namespace nico::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2 };

/// Reads `--config` files written as a flat JSON object keyed by long flag
/// names, e.g. {"exact-cap": 10, "scheme": "uniform"}. Flat keys belong to
/// `section`, the subcommand being run; an object value keyed by a subcommand
/// name holds that subcommand's flags.
class JsonConfig : public CLI::Config {
 public:
  std::string section;

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        for (const auto& [k, v] : value.items()) items.push_back(make_item({key}, k, v));
      } else {
        items.push_back(make_item(section.empty() ? std::vector<std::string>{} : std::vector{section}, key, value));
      }
    }
    return items;
  }

 private:
  static CLI::ConfigItem make_item(std::vector<std::string> parents, const std::string& name,
                                   const nlohmann::json& value) {
    CLI::ConfigItem item;
    item.parents = std::move(parents);
    item.name = name;
    if (value.is_array()) {
      for (const auto& v : value) item.inputs.push_back(scalar(v));
    } else {
      item.inputs.push_back(scalar(value));
    }
    return item;
  }

  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }
};

/// Failure caused by the input data rather than the command line.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

namespace fs = std::filesystem;

// Writes through a temporary file renamed into place on success.
inline void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write " + path.string());
    out << std::setprecision(17);
    body(out);
    if (!out) throw DataError("failed writing " + path.string());
  }
  fs::rename(tmp, path);
}

inline std::optional<EndpointMode> parse_endpoints(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s == "known" ? EndpointMode::KnownEndpoints : EndpointMode::Free;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline std::vector<double> prior_vector(const nlohmann::json& j, std::size_t n) {
  if (j.is_number()) return std::vector<double>(n, j.get<double>());
  auto v = j.get<std::vector<double>>();
  if (v.size() != n) throw DataError("prior u has " + std::to_string(v.size()) + " entries, expected " + std::to_string(n));
  return v;
}

inline Matrix prior_matrix(const nlohmann::json& j, std::size_t n) {
  if (j.is_number()) return Matrix(n, n, j.get<double>());
  auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.size() != n) throw DataError("prior v has wrong number of rows");
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw DataError("prior v row " + std::to_string(i) + " has wrong length");
    for (std::size_t k = 0; k < n; ++k) m(i, k) = rows[i][k];
  }
  return m;
}

inline void report_ingest(const IngestReport& r, std::ostream& err) {
  if (r.repeated_vertex_lines.empty()) return;
  err << "skipped " << r.repeated_vertex_lines.size() << " observation line(s) with repeated vertices:";
  for (std::size_t i = 0; i < std::min<std::size_t>(r.repeated_vertex_lines.size(), 10); ++i)
    err << ' ' << r.repeated_vertex_lines[i];
  if (r.repeated_vertex_lines.size() > 10) err << " ...";
  err << '\n';
}

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace detail

struct InferArgs {
  std::string obs, endpoints, scheme = "causal", prior_u, prior_v, out = "model.json", trace;
  int exact_cap = kDefaultEnumerationCap, restarts = 10, max_iters = 200, hits = 3, trace_exact_cap = -1;
  std::size_t samples = 2000, ranking_samples = 0, ramp = 0;
  double tol = 1e-6, theta_min = 1e-12;
  std::uint64_t seed = 42;
  bool sparse = false;
};

inline int run_infer(const InferArgs& a, std::ostream& out, std::ostream& err) {
  auto data = read_observations_file(a.obs, nullptr, detail::parse_endpoints(a.endpoints));
  detail::report_ingest(data.report, err);
  if (data.observations.empty()) throw DataError(a.obs + ": no observations");
  const std::size_t n = data.states.size();

  EmConfig cfg;
  cfg.max_iters = a.max_iters;
  cfg.tol = a.tol;
  cfg.consecutive_hits = a.hits;
  cfg.exact_cap = a.exact_cap;
  cfg.samples = a.samples;
  cfg.scheme = parse_scheme(a.scheme);
  cfg.restarts = a.restarts;
  cfg.master_seed = a.seed;
  cfg.theta_min = a.theta_min;
  cfg.trace_exact_cap = a.trace_exact_cap;
  cfg.ranking_samples = a.ranking_samples;
  cfg.ramp_slope = a.ramp;
  if (!a.prior_u.empty() || !a.prior_v.empty()) {
    DirichletPriors p = DirichletPriors::constant(n, 1.0);
    if (!a.prior_u.empty()) p.u = detail::prior_vector(detail::read_json_file(a.prior_u), n);
    if (!a.prior_v.empty()) p.v = detail::prior_matrix(detail::read_json_file(a.prior_v), n);
    cfg.priors = std::move(p);
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CLI::ValidationError(e.what());
  }
  if (cfg.theta_min * static_cast<double>(n) >= 1.0)
    throw DataError("theta-min must be below 1/|S| = " + detail::csv_number(1.0 / static_cast<double>(n)));

  auto result = run_restarts(data.observations, n, cfg);
  const auto& best = result.best_run();
  auto j = model_to_json(best.model, data.states, a.sparse);
  j["loglik"] = result.ranking_loglik[result.best];
  j["restart"] = result.best;
  detail::write_file(a.out, [&](std::ostream& o) { o << j.dump(1) << '\n'; });
  if (!a.trace.empty()) {
    detail::write_file(a.trace, [&](std::ostream& o) {
      o << "restart,iter,loglik,q_value,ess_min,seconds\n";
      for (const auto& run : result.runs)
        for (const auto& r : run.trace.rows)
          o << r.restart << ',' << r.iter << ',' << detail::csv_number(r.loglik) << ','
            << detail::csv_number(r.q_value) << ',' << detail::csv_number(r.ess_min) << ','
            << detail::csv_number(r.seconds) << '\n';
    });
  }
  out << "observations " << data.observations.size() << ", states " << n << '\n';
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    const auto& t = result.runs[r].trace;
    out << "restart " << r << ": " << t.rows.size() << " iterations (" << t.stop_reason << "), loglik "
        << detail::csv_number(result.ranking_loglik[r]);
    if (t.non_monotone) out << ", " << t.non_monotone << " non-monotone";
    out << '\n';
  }
  out << "best restart " << result.best << '\n';
  return kOk;
}

struct ReconstructArgs {
  std::string obs, model, out = "edges.tsv", scores, endpoints, scheme = "causal";
  int exact_cap = kDefaultEnumerationCap;
  std::size_t samples = 2000;
  std::uint64_t seed = 42;
};

inline int run_reconstruct(const ReconstructArgs& a, std::ostream& out, std::ostream& err) {
  auto lm = read_model_file(a.model);
  auto violations = validate_model(lm.model, 1e-9);
  if (!violations.empty()) throw DataError(a.model + ": model is not a valid Markov chain");
  auto data = read_observations_file(a.obs, &lm.states, detail::parse_endpoints(a.endpoints));
  detail::report_ingest(data.report, err);
  DecodeOptions opt{a.exact_cap, a.samples, parse_scheme(a.scheme)};
  auto run = experiments::decode_graph(lm.model, data.observations, lm.states, opt, a.seed);
  const bool feasible = feasibility_check(run.graph, data.observations, run.orders);
  detail::write_file(a.out, [&](std::ostream& o) { write_edges(o, run.graph); });
  if (!a.scores.empty()) {
    auto st = stationary_distribution(lm.model.A);
    if (st.damped) err << "stationary distribution: power iteration damped toward uniform\n";
    if (st.multiple) err << "stationary distribution is not unique (several closed classes)\n";
    auto scores = edge_joint_scores(lm.model);
    detail::write_file(a.scores, [&](std::ostream& o) { write_scores(o, scores, lm.states); });
  }
  out << "edges " << run.graph.num_edges() << ", feasible " << (feasible ? "yes" : "no") << '\n';
  return kOk;
}

struct FmArgs {
  std::string obs, out_dir = "fm", endpoints;
  std::uint64_t seed = 42;
  int restarts = 10;
};

inline int run_fm(const FmArgs& a, std::ostream& out, std::ostream& err) {
  auto data = read_observations_file(a.obs, nullptr, detail::parse_endpoints(a.endpoints));
  detail::report_ingest(data.report, err);
  for (const auto& o : data.observations)
    if (!o.known_endpoints()) throw DataError("fm needs observations with known endpoints ('%endpoints known')");
  namespace fs = std::filesystem;
  std::vector<std::pair<std::size_t, std::uint64_t>> summary;
  for (int r = 0; r < a.restarts; ++r) {
    const std::uint64_t seed = derive_seed(a.seed, {static_cast<std::uint64_t>(r)});
    auto res = fm_reconstruct(data.observations, data.states, seed);
    detail::write_file(fs::path(a.out_dir) / ("run_" + std::to_string(r)) / "edges.tsv",
                       [&](std::ostream& o) { write_edges(o, res.graph); });
    summary.emplace_back(res.graph.num_edges(), seed);
  }
  detail::write_file(fs::path(a.out_dir) / "summary.csv", [&](std::ostream& o) {
    o << "restart,edges,seed\n";
    for (std::size_t r = 0; r < summary.size(); ++r) o << r << ',' << summary[r].first << ',' << summary[r].second << '\n';
  });
  out << "wrote " << a.restarts << " reconstructions to " << a.out_dir << '\n';
  return kOk;
}

struct SimulateArgs {
  std::string preset, routing = "shortest", out_dir = "sim";
  std::size_t nodes = 50, sources = 5, dests = 20;
  std::uint64_t seed = 42;
};

inline int run_simulate(SimulateArgs a, std::ostream& out, std::ostream&) {
  if (!a.preset.empty() && a.preset != "fig4") throw CLI::ValidationError("--preset", "unknown preset " + a.preset);
  if (a.routing != "shortest" && a.routing != "random")
    throw CLI::ValidationError("--routing", "must be shortest or random");
  namespace fs = std::filesystem;
  auto net = experiments::simulate_network(a.nodes, a.sources, a.dests, a.routing == "random", a.seed);
  const auto& states = net.rgg.graph.vertices;
  const fs::path dir(a.out_dir);
  detail::write_file(dir / "graph.tsv", [&](std::ostream& o) { write_edges(o, net.rgg.graph); });
  detail::write_file(dir / "ref.tsv", [&](std::ostream& o) {
    write_edges(o, reference_graph_from_ordered(net.paths, states));
  });
  detail::write_file(dir / "paths.txt", [&](std::ostream& o) { write_paths(o, net.paths, states); });
  detail::write_file(dir / "obs.txt", [&](std::ostream& o) { write_observations(o, net.shuffled.observations, states); });
  detail::write_file(dir / "obs_free.txt", [&](std::ostream& o) { write_observations(o, net.free_observations, states); });
  std::size_t longest = 0;
  for (const auto& p : net.paths) longest = std::max(longest, p.size());
  nlohmann::json meta{{"preset", a.preset},
                      {"nodes", a.nodes},
                      {"sources", a.sources},
                      {"destinations", a.dests},
                      {"routing", a.routing},
                      {"seed", a.seed},
                      {"radius", default_radius(a.nodes)},
                      {"connected", net.rgg.connected},
                      {"attempts", net.rgg.attempts},
                      {"observations", net.paths.size()},
                      {"longest_path", longest},
                      {"endpoints", {{"obs.txt", "known"}, {"obs_free.txt", "free"}}},
                      {"version", kVersion}};
  detail::write_file(dir / "meta.json", [&](std::ostream& o) { o << meta.dump(1) << '\n'; });
  if (!net.rgg.connected) out << "warning: graph is disconnected after " << net.rgg.attempts << " attempts\n";
  out << "wrote " << net.paths.size() << " observations to " << a.out_dir << '\n';
  return kOk;
}

struct EvalArgs {
  std::string est, ref, out, dir;
};

inline int run_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  auto est = read_edges_file(a.est);
  auto ref = read_edges_file(a.ref);
  auto d = edge_symmetric_difference(est, ref);
  nlohmann::json j{{"symdiff", d.total},
                   {"false_positives", d.false_positives},
                   {"false_negatives", d.false_negatives},
                   {"est_edges", est.num_edges()},
                   {"ref_edges", ref.num_edges()}};
  if (!a.out.empty()) detail::write_file(a.out, [&](std::ostream& o) { o << j.dump(1) << '\n'; });
  out << j.dump() << '\n';
  return kOk;
}

/// Each subdirectory of --dir is one run holding edges.tsv and optionally
/// ref.tsv and run.json ({"loglik": x}). Runs without ref.tsv use --ref, or
/// ref.tsv in --dir itself.
inline int run_eval_sweep(const EvalArgs& a, std::ostream& out, std::ostream&) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(a.dir)) throw DataError(a.dir + " is not a directory");
  std::vector<fs::path> runs;
  for (const auto& e : fs::directory_iterator(a.dir))
    if (e.is_directory() && fs::exists(e.path() / "edges.tsv")) runs.push_back(e.path());
  std::sort(runs.begin(), runs.end());
  if (runs.empty()) throw DataError(a.dir + ": no run directories with edges.tsv");
  std::optional<DirectedGraph> shared_ref;
  if (!a.ref.empty()) shared_ref = read_edges_file(a.ref);
  else if (fs::exists(fs::path(a.dir) / "ref.tsv")) shared_ref = read_edges_file((fs::path(a.dir) / "ref.tsv").string());

  std::ostringstream csv;
  csv << "run,edges,symdiff,fp,fn,loglik\n";
  for (const auto& r : runs) {
    DirectedGraph ref;
    if (fs::exists(r / "ref.tsv")) ref = read_edges_file((r / "ref.tsv").string());
    else if (shared_ref) ref = *shared_ref;
    else throw DataError(r.string() + ": no reference graph (ref.tsv or --ref)");
    auto est = read_edges_file((r / "edges.tsv").string());
    auto d = edge_symmetric_difference(est, ref);
    std::string ll;
    if (fs::exists(r / "run.json")) {
      auto j = detail::read_json_file((r / "run.json").string());
      if (j.contains("loglik") && j["loglik"].is_number()) ll = detail::csv_number(j["loglik"].get<double>());
    }
    csv << r.filename().string() << ',' << est.num_edges() << ',' << d.total << ',' << d.false_positives << ','
        << d.false_negatives << ',' << ll << '\n';
  }
  if (a.out.empty()) out << csv.str();
  else detail::write_file(a.out, [&](std::ostream& o) { o << csv.str(); });
  return kOk;
}

inline int run_bounds(const std::string& input, const std::string& out_path, std::ostream& out) {
  auto in = bound_inputs_from_json(detail::read_json_file(input));
  in.validate();
  std::ostringstream csv;
  csv << std::setprecision(17) << "m,N_m,b_m,L_pam,L_mono\n";
  for (std::size_t m = 0; m < in.T; ++m) {
    csv << m << ',' << in.N[m] << ',' << in.b[m] << ',';
    if (in.theta_min > 0.0) csv << static_cast<unsigned long long>(pam_sample_size(in, m));
    else csv << "undefined";
    csv << ',';
    if (auto mono = monotone_sample_size(in, m)) csv << static_cast<unsigned long long>(*mono);
    else csv << "undefined";
    csv << '\n';
  }
  if (out_path.empty()) out << csv.str();
  else detail::write_file(out_path, [&](std::ostream& o) { o << csv.str(); });
  return kOk;
}

struct PresetArgs {
  std::string name, out_dir = "preset", routing = "shortest";
  double scale = 0.1;
  std::uint64_t seed = 42;
  std::vector<std::size_t> dests{5, 10, 20, 40};
};

inline std::size_t scaled(double full_count, double scale) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(full_count * scale)));
}

inline int run_preset(const PresetArgs& a, std::ostream& out, std::ostream&) {
  namespace fs = std::filesystem;
  if (!(a.scale > 0.0)) throw CLI::ValidationError("--scale", "must be positive");
  const fs::path dir(a.out_dir);
  nlohmann::json manifest{{"preset", a.name}, {"version", kVersion}, {"seed", a.seed}, {"scale", a.scale}};
  std::vector<std::string> files;

  if (a.name == "fig1") {
    const std::size_t trials = scaled(50, a.scale);
    const std::vector<std::pair<std::string, double>> scenarios{
        {"uniform", 1.0}, {"moderate", 10.0}, {"concentrated", 100.0}};
    std::ostringstream csv;
    csv << std::setprecision(17) << "scenario,scheme,samples,mean_l1\n";
    for (const auto& [name, peak] : scenarios) {
      experiments::Fig1Config cfg;
      cfg.peak = peak;
      cfg.trials = trials;
      cfg.seed = a.seed;
      for (const auto& row : experiments::fig1(cfg))
        csv << name << ',' << row.scheme << ',' << row.samples << ',' << row.mean_l1 << '\n';
    }
    detail::write_file(dir / "fig1.csv", [&](std::ostream& o) { o << csv.str(); });
    files.push_back("fig1.csv");
    manifest["full_scale"] = {{"trials", 50}, {"path_length", 8}};
    manifest["executed"] = {{"trials", trials}, {"path_length", 8}, {"scenario_peaks", {1.0, 10.0, 100.0}},
                            {"sample_sizes", experiments::Fig1Config{}.sample_sizes}};
  } else if (a.name == "fig3") {
    experiments::Fig3Config cfg;
    cfg.seed = a.seed;
    auto res = experiments::fig3(cfg);
    std::ostringstream csv;
    csv << std::setprecision(17) << "method,iter,loglik,q_value\n";
    auto dump = [&](const std::string& name, const EmRun& run) {
      for (const auto& r : run.trace.rows) csv << name << ',' << r.iter << ',' << r.loglik << ',' << r.q_value << '\n';
    };
    dump("exact", res.exact);
    for (std::size_t i = 0; i < res.sampled.size(); ++i) dump("mcem_" + std::to_string(cfg.sample_sizes[i]), res.sampled[i]);
    detail::write_file(dir / "fig3.csv", [&](std::ostream& o) { o << csv.str(); });
    files.push_back("fig3.csv");
    manifest["full_scale"] = {{"vertices", 140}, {"observations", 40}, {"length", {4, 8}}, {"samples", {10, 1000}}};
    manifest["executed"] = {{"vertices", cfg.vertices},
                            {"observations", cfg.observations},
                            {"length", {cfg.min_len, cfg.max_len}},
                            {"samples", cfg.sample_sizes},
                            {"iterations", cfg.iterations},
                            {"theta_min", cfg.theta_min}};
  } else if (a.name == "fig4") {
    const std::size_t topologies = scaled(100, a.scale);
    std::ostringstream csv;
    csv << "routing,destinations,topology,observations,ref_edges,nico_pick,nico_min,nico_median,nico_max,"
           "fm_clairvoyant,fm_sparsest,fm_median\n";
    for (std::size_t dests : a.dests) {
      experiments::Fig4Config cfg;
      cfg.destinations = dests;
      cfg.random_routing = a.routing == "random";
      cfg.seed = derive_seed(a.seed, {dests});
      for (std::size_t t = 0; t < topologies; ++t) {
        auto r = experiments::fig4_topology(cfg, t);
        csv << a.routing << ',' << dests << ',' << t << ',' << r.observations << ',' << r.reference_edges << ','
            << r.nico_pick_error() << ',' << r.nico_summary.min_error << ',' << r.nico_summary.median_error << ','
            << r.nico_summary.max_error << ',' << r.fm_clairvoyant_error() << ',' << r.fm_sparsest_error() << ','
            << r.fm_summary.median_error << '\n';
      }
    }
    detail::write_file(dir / "fig4.csv", [&](std::ostream& o) { o << csv.str(); });
    files.push_back("fig4.csv");
    manifest["full_scale"] = {{"topologies", 100}, {"restarts", 10}, {"nodes", 50}, {"sources", 5}};
    manifest["executed"] = {{"topologies", topologies}, {"restarts", 10}, {"nodes", 50},
                            {"sources", 5},             {"destinations", a.dests}, {"routing", a.routing}};
  } else {
    throw CLI::ValidationError("preset", "unknown preset " + a.name + " (expected fig1, fig3 or fig4)");
  }
  manifest["files"] = files;
  detail::write_file(dir / "manifest.json", [&](std::ostream& o) { o << manifest.dump(1) << '\n'; });
  out << "wrote";
  for (const auto& f : files) out << ' ' << (dir / f).string();
  out << '\n';
  return kOk;
}

/// Parses and runs one command line. Returns the process exit code.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Network inference from co-occurrences", "nico"};
  auto config = std::make_shared<JsonConfig>();
  app.config_formatter(config);
  app.set_config("--config", "", "JSON file of flag values for the subcommand");
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto endpoint_check = CLI::IsMember({"known", "free"});
  auto scheme_check = CLI::IsMember({"causal", "uniform"});

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "Fit a Markov chain to observations by EM");
  c_infer->add_option("--obs", infer.obs, "Observation file")->required();
  c_infer->add_option("--endpoints", infer.endpoints, "Override the file's endpoint mode")->check(endpoint_check);
  c_infer->add_option("--exact-cap", infer.exact_cap, "Longest observation for the exact E-step")->capture_default_str();
  c_infer->add_option("--samples", infer.samples, "Importance samples per observation")->capture_default_str();
  c_infer->add_option("--scheme", infer.scheme, "Proposal: causal or uniform")->check(scheme_check)->capture_default_str();
  c_infer->add_option("--restarts", infer.restarts, "Random restarts")->capture_default_str();
  c_infer->add_option("--max-iters", infer.max_iters, "EM iteration cap")->capture_default_str();
  c_infer->add_option("--tol", infer.tol, "Relative log-likelihood tolerance")->capture_default_str();
  c_infer->add_option("--hits", infer.hits, "Successive iterations within tolerance")->capture_default_str();
  c_infer->add_option("--seed", infer.seed, "Master seed")->capture_default_str();
  c_infer->add_option("--theta-min", infer.theta_min, "Probability floor")->capture_default_str();
  c_infer->add_option("--prior-u", infer.prior_u, "Dirichlet parameters for pi (JSON number or array)");
  c_infer->add_option("--prior-v", infer.prior_v, "Dirichlet parameters for A (JSON number or matrix)");
  c_infer->add_option("--trace-exact-cap", infer.trace_exact_cap, "Exact trace log-likelihood up to this length");
  c_infer->add_option("--ranking-samples", infer.ranking_samples, "Samples for restart ranking (0: 5x samples)");
  c_infer->add_option("--ramp", infer.ramp, "Extra samples per iteration");
  c_infer->add_flag("--sparse", infer.sparse, "Write A as a sparse triplet list");
  c_infer->add_option("--out", infer.out, "Model JSON")->capture_default_str();
  c_infer->add_option("--trace", infer.trace, "Trace CSV");

  ReconstructArgs rec;
  auto* c_rec = app.add_subcommand("reconstruct", "Decode most likely orders into a graph");
  c_rec->add_option("--obs", rec.obs, "Observation file")->required();
  c_rec->add_option("--model", rec.model, "Model JSON")->required();
  c_rec->add_option("--out", rec.out, "Edge list")->capture_default_str();
  c_rec->add_option("--scores", rec.scores, "Joint edge scores");
  c_rec->add_option("--endpoints", rec.endpoints, "Override the file's endpoint mode")->check(endpoint_check);
  c_rec->add_option("--exact-cap", rec.exact_cap, "Longest observation decoded exactly")->capture_default_str();
  c_rec->add_option("--samples", rec.samples, "Samples for heuristic decoding")->capture_default_str();
  c_rec->add_option("--scheme", rec.scheme, "Proposal: causal or uniform")->check(scheme_check)->capture_default_str();
  c_rec->add_option("--seed", rec.seed, "Seed")->capture_default_str();

  FmArgs fm;
  auto* c_fm = app.add_subcommand("fm", "Frequency-method baseline");
  c_fm->add_option("--obs", fm.obs, "Observation file")->required();
  c_fm->add_option("--endpoints", fm.endpoints, "Override the file's endpoint mode")->check(endpoint_check);
  c_fm->add_option("--seed", fm.seed, "Seed")->capture_default_str();
  c_fm->add_option("--restarts", fm.restarts, "Tie-breaking restarts")->capture_default_str();
  c_fm->add_option("--out-dir", fm.out_dir, "Output directory")->capture_default_str();

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic network and observations");
  c_sim->add_option("--preset", sim.preset, "Preset (fig4)");
  c_sim->add_option("--nodes", sim.nodes, "Vertices")->capture_default_str();
  c_sim->add_option("--sources", sim.sources, "Sources")->capture_default_str();
  c_sim->add_option("--dests", sim.dests, "Destinations")->capture_default_str();
  c_sim->add_option("--routing", sim.routing, "shortest or random")->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "Seed")->capture_default_str();
  c_sim->add_option("--out-dir", sim.out_dir, "Output directory")->capture_default_str();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Edge symmetric difference of two graphs");
  c_eval->add_option("--est", ev.est, "Estimated edge list")->required();
  c_eval->add_option("--ref", ev.ref, "Reference edge list")->required();
  c_eval->add_option("--out", ev.out, "Report JSON");

  EvalArgs sweep;
  auto* c_sweep = app.add_subcommand("eval-sweep", "Evaluate a directory of runs");
  c_sweep->add_option("--dir", sweep.dir, "Directory of runs")->required();
  c_sweep->add_option("--ref", sweep.ref, "Reference edge list for runs without ref.tsv");
  c_sweep->add_option("--out", sweep.out, "Summary CSV");

  std::string bounds_in, bounds_out;
  auto* c_bounds = app.add_subcommand("bounds", "Sample-size bounds per observation");
  c_bounds->add_option("--input", bounds_in, "Bound inputs JSON")->required();
  c_bounds->add_option("--out", bounds_out, "CSV output (default stdout)");

  PresetArgs pre;
  auto* c_pre = app.add_subcommand("preset", "Run a scaled experiment preset");
  c_pre->add_option("name", pre.name, "fig1, fig3 or fig4")->required()->check(CLI::IsMember({"fig1", "fig3", "fig4"}));
  c_pre->add_option("--scale", pre.scale, "Multiplier on the experiment counts")->capture_default_str();
  c_pre->add_option("--seed", pre.seed, "Seed")->capture_default_str();
  c_pre->add_option("--out-dir", pre.out_dir, "Output directory")->capture_default_str();
  c_pre->add_option("--routing", pre.routing, "fig4 routing: shortest or random")->capture_default_str();
  c_pre->add_option("--dests", pre.dests, "fig4 destination counts")->capture_default_str();

  for (const auto& s : args)
    if (app.get_subcommand_no_throw(s)) {
      config->section = s;
      break;
    }
  std::vector<const char*> argv{"nico"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (c_infer->parsed()) return run_infer(infer, out, err);
    if (c_rec->parsed()) return run_reconstruct(rec, out, err);
    if (c_fm->parsed()) return run_fm(fm, out, err);
    if (c_sim->parsed()) return run_simulate(sim, out, err);
    if (c_eval->parsed()) return run_eval(ev, out, err);
    if (c_sweep->parsed()) return run_eval_sweep(sweep, out, err);
    if (c_bounds->parsed()) return run_bounds(bounds_in, bounds_out, out);
    if (c_pre->parsed()) return run_preset(pre, out, err);
  } catch (const CLI::ValidationError& e) {
    err << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace nico::cli
