#pragma once

// Text and JSON formats: observation files, models, edge lists, bound inputs.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nico/graph.hpp"
#include "nico/model.hpp"
#include "nico/sampler.hpp"

namespace nico {

/// Malformed input, with the 1-based line number when one applies.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct IngestReport {
  std::size_t lines = 0;
  std::size_t observations = 0;
  std::size_t comments = 0;
  std::size_t blank = 0;
  std::vector<std::size_t> repeated_vertex_lines;  // rejected, not fatal
};

struct ObservationSet {
  StateSpace states;
  std::vector<Observation> observations;
  std::vector<std::size_t> source_lines;  // file line of each observation
  IngestReport report;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Reads an observation file. With `fixed_states` set, labels must already
/// exist in that state space. `mode_override` replaces the file's endpoint
/// directive.
inline ObservationSet read_observations(std::istream& in, const StateSpace* fixed_states = nullptr,
                                        std::optional<EndpointMode> mode_override = std::nullopt) {
  ObservationSet out;
  if (fixed_states) out.states = *fixed_states;
  EndpointMode mode = EndpointMode::Free;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    ++out.report.lines;
    const std::string line = detail::trim(raw);
    if (line.empty()) {
      ++out.report.blank;
      continue;
    }
    if (line[0] == '#') {
      ++out.report.comments;
      continue;
    }
    if (line[0] == '%') {
      auto tok = detail::split_ws(line);
      if (tok[0] != "%endpoints") throw ParseError(line_no, "unknown directive " + tok[0]);
      if (tok.size() != 2 || (tok[1] != "known" && tok[1] != "free"))
        throw ParseError(line_no, "expected '%endpoints known' or '%endpoints free'");
      mode = tok[1] == "known" ? EndpointMode::KnownEndpoints : EndpointMode::Free;
      continue;
    }
    auto labels = detail::split_ws(line);
    Observation o;
    o.mode = mode_override.value_or(mode);
    if (o.known_endpoints() && labels.size() < 2)
      throw ParseError(line_no, "an observation with known endpoints needs at least two vertices");
    std::vector<std::string> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      out.report.repeated_vertex_lines.push_back(line_no);
      continue;
    }
    for (const auto& l : labels) {
      int idx = out.states.find(l);
      if (idx < 0) {
        if (fixed_states) throw ParseError(line_no, "vertex '" + l + "' is not in the model");
        idx = out.states.add(l);
      }
      o.positions.push_back(idx);
    }
    out.observations.push_back(std::move(o));
    out.source_lines.push_back(line_no);
    ++out.report.observations;
  }
  return out;
}

inline ObservationSet read_observations_file(const std::string& path, const StateSpace* fixed_states = nullptr,
                                             std::optional<EndpointMode> mode_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_observations(in, fixed_states, mode_override);
}

inline void write_observations(std::ostream& out, std::span<const Observation> obs, const StateSpace& states) {
  if (!obs.empty()) out << "%endpoints " << to_string(obs.front().mode) << '\n';
  for (const auto& o : obs) {
    for (std::size_t t = 0; t < o.size(); ++t) out << (t ? " " : "") << states.label(o.positions[t]);
    out << '\n';
  }
}

inline void write_paths(std::ostream& out, std::span<const std::vector<int>> paths, const StateSpace& states) {
  for (const auto& z : paths) {
    for (std::size_t t = 0; t < z.size(); ++t) out << (t ? " " : "") << states.label(z[t]);
    out << '\n';
  }
}

/// Ordered paths, one per line, labels added to `states` as they appear.
inline std::vector<std::vector<int>> read_paths(std::istream& in, StateSpace& states) {
  std::vector<std::vector<int>> out;
  std::string raw;
  while (std::getline(in, raw)) {
    const auto line = detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::vector<int> z;
    for (const auto& l : detail::split_ws(line)) z.push_back(states.add(l));
    out.push_back(std::move(z));
  }
  return out;
}

struct LabeledModel {
  StateSpace states;
  MarkovModel model;
};

inline nlohmann::json model_to_json(const MarkovModel& m, const StateSpace& states, bool sparse = false) {
  nlohmann::json j;
  j["labels"] = states.labels();
  j["pi"] = m.pi;
  j["theta_min"] = m.theta_min;
  const std::size_t n = m.A.rows();
  if (sparse) {
    // Entries at the floor are implied by theta_min.
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        if (m.A(i, k) > m.theta_min) rows.push_back({i, k, m.A(i, k)});
    j["A_sparse"] = rows;
  } else {
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) {
      auto r = m.A.row(i);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    j["A"] = rows;
  }
  return j;
}

inline LabeledModel model_from_json(const nlohmann::json& j) {
  LabeledModel out;
  try {
    out.states = StateSpace(j.at("labels").get<std::vector<std::string>>());
    out.model.pi = j.at("pi").get<std::vector<double>>();
    out.model.theta_min = j.value("theta_min", 0.0);
    const std::size_t n = out.states.size();
    if (out.model.pi.size() != n) throw ParseError(0, "model: pi length does not match labels");
    if (j.contains("A")) {
      auto rows = j.at("A").get<std::vector<std::vector<double>>>();
      if (rows.size() != n) throw ParseError(0, "model: A row count does not match labels");
      out.model.A = Matrix(n, n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n) throw ParseError(0, "model: A row " + std::to_string(i) + " has wrong length");
        for (std::size_t k = 0; k < n; ++k) out.model.A(i, k) = rows[i][k];
      }
    } else if (j.contains("A_sparse")) {
      out.model.A = Matrix(n, n, out.model.theta_min);
      for (const auto& e : j.at("A_sparse")) {
        auto i = e.at(0).get<std::size_t>();
        auto k = e.at(1).get<std::size_t>();
        if (i >= n || k >= n) throw ParseError(0, "model: A_sparse index out of range");
        out.model.A(i, k) = e.at(2).get<double>();
      }
    } else {
      throw ParseError(0, "model: missing A");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("model: ") + e.what());
  }
  return out;
}

inline LabeledModel read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, path + ": " + e.what());
  }
  return model_from_json(j);
}

/// "src dst" per line.
inline void write_edges(std::ostream& out, const DirectedGraph& g) {
  for (const auto& [a, b] : g.labeled_edges()) out << a << '\t' << b << '\n';
}

inline DirectedGraph read_edges(std::istream& in) {
  DirectedGraph g;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto tok = detail::split_ws(line);
    if (tok.size() < 2) throw ParseError(line_no, "expected 'src dst'");
    g.add_edge(tok[0], tok[1]);
  }
  return g;
}

inline DirectedGraph read_edges_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_edges(in);
}

inline void write_scores(std::ostream& out, const Matrix& scores, const StateSpace& states) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < scores.rows(); ++i)
    for (std::size_t k = 0; k < scores.cols(); ++k)
      if (scores(i, k) > 0.0) out << states.label(static_cast<int>(i)) << '\t' << states.label(static_cast<int>(k)) << '\t' << scores(i, k) << '\n';
}

inline BoundInputs bound_inputs_from_json(const nlohmann::json& j) {
  BoundInputs b;
  try {
    b.N = j.at("N").get<std::vector<double>>();
    b.T = j.value("T", b.N.size());
    if (j.at("b").is_array()) b.b = j.at("b").get<std::vector<double>>();
    else b.b.assign(b.N.size(), j.at("b").get<double>());
    b.theta_min = j.value("theta_min", 0.0);
    if (j.contains("lambda") && !j["lambda"].is_null()) b.lambda = j["lambda"].get<double>();
    if (j.contains("delta_star") && !j["delta_star"].is_null()) b.delta_star = j["delta_star"].get<double>();
    b.delta = j.value("delta", b.delta);
    b.epsilon = j.value("epsilon", b.epsilon);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("bounds: ") + e.what());
  }
  return b;
}

}  // namespace nico
