#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "fgl/error.hpp"
#include "fgl/matexp.hpp"
#include "fgl/params.hpp"

namespace fgl::harness {

inline constexpr int kSchemaVersion = 1;
/// Rank value standing for the full-rank split solution in sweep columns.
inline constexpr int kFullRank = 0;

enum class Preset { Example1, Example2, Custom };
enum class Mode { TemporalSweep, SpatialSweep, SingleRun };

struct ReferenceSpec {
  int n = 0;
  int m = 0;
};

/// A validated experiment description.
///
/// Temporal sweeps hold N fixed (one grid entry) and vary M; spatial sweeps hold M fixed and
/// vary N. Single runs use one entry of every list.
struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  Preset preset = Preset::Example1;
  Mode mode = Mode::TemporalSweep;
  std::vector<std::pair<double, double>> pairs;  // (alpha, beta)
  std::vector<int> steps;                        // M values
  std::vector<int> grid;                         // N values
  std::vector<int> ranks;                        // kFullRank = full-rank split solution
  ReferenceSpec reference;
  int rk4_substeps = 1;
  Index dense_limit = kDefaultDenseLimit;
  std::string output = "out";
  std::string cache = "cache";
  std::uint64_t seed = 0;
  int threads = 1;
  FglParams base;  // physical parameters; alpha/beta replaced per pair

  FglParams params_for(const std::pair<double, double>& ab) const {
    FglParams p = base;
    p.alpha = ab.first;
    p.beta = ab.second;
    if (auto* rr = std::get_if<initial::RankR>(&p.initial_condition)) rr->seed = seed;
    return p;
  }

  void validate() const;
};

inline std::string to_string(Preset p) {
  switch (p) {
    case Preset::Example1: return "example1";
    case Preset::Example2: return "example2";
    case Preset::Custom: return "custom";
  }
  return "custom";
}

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::TemporalSweep: return "temporal";
    case Mode::SpatialSweep: return "spatial";
    case Mode::SingleRun: return "single";
  }
  return "single";
}

inline Preset parse_preset(const std::string& s, int line = -1) {
  if (s == "example1") return Preset::Example1;
  if (s == "example2") return Preset::Example2;
  if (s == "custom") return Preset::Custom;
  throw ConfigError("unknown preset '" + s + "' (expected example1, example2 or custom)", line);
}

inline Mode parse_mode(const std::string& s, int line = -1) {
  if (s == "temporal") return Mode::TemporalSweep;
  if (s == "spatial") return Mode::SpatialSweep;
  if (s == "single") return Mode::SingleRun;
  throw ConfigError("unknown mode '" + s + "' (expected temporal, spatial or single)", line);
}

inline FglParams preset_params(Preset p) {
  return p == Preset::Example2 ? FglParams::example2() : FglParams::example1();
}

inline const std::vector<std::pair<double, double>>& standard_pairs() {
  static const std::vector<std::pair<double, double>> pairs = {{1.2, 1.9}, {1.5, 1.5}, {1.7, 1.3}, {1.9, 1.2}};
  return pairs;
}

/// Desk-scale defaults: temporal N=128, M in {16,64,256}, reference M=4096; spatial
/// N in {16,32,64,128}, reference N=256, M=2048; single N=128, M=256.
inline ExperimentConfig default_config(Preset preset, Mode mode) {
  ExperimentConfig c;
  c.preset = preset;
  c.mode = mode;
  c.base = preset_params(preset);
  c.pairs = standard_pairs();
  c.ranks = preset == Preset::Example2 ? std::vector<int>{1, 2, 4, 6, 8} : std::vector<int>{1, 2, 3, 4, 5};
  c.output = "out/" + to_string(preset) + "-" + to_string(mode);
  switch (mode) {
    case Mode::TemporalSweep:
      c.grid = {128};
      c.steps = {16, 64, 256};
      c.reference = {128, 4096};
      break;
    case Mode::SpatialSweep:
      c.grid = {16, 32, 64, 128};
      c.steps = {2048};
      c.reference = {256, 2048};
      break;
    case Mode::SingleRun:
      c.pairs = {{1.5, 1.5}};
      c.grid = {128};
      c.steps = {256};
      c.ranks = {preset == Preset::Example2 ? 8 : 5};
      c.reference = {128, 4096};
      break;
  }
  return c;
}

namespace detail {

inline bool strictly_ascending(const std::vector<int>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](int a, int b) { return !(a < b); }) == v.end();
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  if (schema_version != kSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(schema_version));
  if (pairs.empty()) throw ConfigError("pairs must list at least one (alpha, beta)");
  if (steps.empty()) throw ConfigError("steps must list at least one M");
  if (grid.empty()) throw ConfigError("grid must list at least one N");
  if (ranks.empty()) throw ConfigError("ranks must list at least one rank");
  for (const auto& [a, b] : pairs)
    if (!(a > 1.0 && a < 2.0 && b > 1.0 && b < 2.0))
      throw ConfigError("fractional orders must lie in (1, 2)");
  for (int m : steps)
    if (m < 1) throw ConfigError("steps must be positive");
  for (int n : grid)
    if (n < 4) throw ConfigError("grid sizes must be >= 4");
  for (int r : ranks)
    if (r < 0) throw ConfigError("ranks must be positive (or 'full')");
  if (!detail::strictly_ascending(steps) || !detail::strictly_ascending(grid) || !detail::strictly_ascending(ranks))
    throw ConfigError("sweep lists must be sorted ascending without duplicates");
  if (ranks.back() > grid.front() - 1)
    throw ConfigError("rank " + std::to_string(ranks.back()) + " exceeds N-1 for N=" + std::to_string(grid.front()));
  if (rk4_substeps < 1) throw ConfigError("rk4_substeps must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (dense_limit < 1) throw ConfigError("dense_limit must be positive");
  try {
    FglParams p = base;
    p.alpha = pairs.front().first;
    p.beta = pairs.front().second;
    p.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("invalid physical parameters: ") + e.what());
  }

  const bool has_reference = reference.n > 0 || reference.m > 0;
  switch (mode) {
    case Mode::TemporalSweep:
      if (grid.size() != 1) throw ConfigError("temporal sweeps fix N: grid must hold exactly one value");
      if (reference.n != grid.front()) throw ConfigError("temporal sweeps need reference.n equal to the grid N");
      if (reference.m < 16 * steps.back())
        throw ConfigError("reference.m must be at least 16x the largest tested M");
      break;
    case Mode::SpatialSweep:
      if (steps.size() != 1) throw ConfigError("spatial sweeps fix M: steps must hold exactly one value");
      if (reference.m < steps.front()) throw ConfigError("reference.m must be >= the tested M");
      for (int n : grid)
        if (reference.n <= n || reference.n % n != 0)
          throw ConfigError("reference.n must be a strict multiple of every tested N");
      break;
    case Mode::SingleRun:
      if (pairs.size() != 1 || steps.size() != 1 || grid.size() != 1 || ranks.size() != 1)
        throw ConfigError("single runs take exactly one pair, M, N and rank");
      if (has_reference && (reference.n < 4 || reference.m < 1 || reference.n % grid.front() != 0))
        throw ConfigError("single-run reference must be a multiple of N with m >= 1");
      break;
  }
}

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : -1; }

template <typename T>
T scalar_as(const YAML::Node& n, const std::string& what) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + what + "' has the wrong type", line_of(n));
  }
}

inline std::vector<int> int_list(const YAML::Node& n, const std::string& what, bool allow_full = false) {
  if (!n.IsSequence()) throw ConfigError("'" + what + "' must be a list", line_of(n));
  std::vector<int> out;
  for (const auto& item : n) {
    if (allow_full && item.IsScalar() && item.Scalar() == "full") {
      out.push_back(kFullRank);
      continue;
    }
    out.push_back(scalar_as<int>(item, what));
  }
  return out;
}

inline InitialCondition parse_initial(const YAML::Node& n) {
  if (n.IsScalar()) {
    const std::string kind = n.Scalar();
    if (kind == "example1") return initial::Example1{};
    if (kind == "example2") return initial::Example2{};
    throw ConfigError("unknown initial condition '" + kind + "'", line_of(n));
  }
  if (!n.IsMap() || !n["kind"]) throw ConfigError("initial must be a name or a map with 'kind'", line_of(n));
  const std::string kind = scalar_as<std::string>(n["kind"], "initial.kind");
  if (kind == "example1") return initial::Example1{};
  if (kind == "example2") return initial::Example2{};
  if (kind == "rank_r") {
    initial::RankR rr;
    rr.rank = n["rank"] ? scalar_as<int>(n["rank"], "initial.rank") : 1;
    if (rr.rank < 1) throw ConfigError("initial.rank must be >= 1", line_of(n["rank"]));
    return rr;
  }
  throw ConfigError("unknown initial condition '" + kind + "'", line_of(n["kind"]));
}

}  // namespace detail

/// Parses a config document. Unset keys fall back to the desk-scale defaults of the preset and
/// mode; sweep lists that are present but empty are rejected by validation.
inline ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line + 1);
  }
  if (!root.IsMap()) throw ConfigError("config must be a key-value map", 1);

  static const std::vector<std::string> known = {
      "schema_version", "preset", "mode", "pairs", "steps", "grid", "ranks", "reference", "rk4_substeps",
      "dense_limit", "output", "cache", "seed", "threads", "params", "initial"};
  for (const auto& kv : root) {
    const std::string key = kv.first.Scalar();
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown key '" + key + "'", detail::line_of(kv.first));
  }

  if (!root["schema_version"]) throw ConfigError("missing schema_version", 1);
  const int version = detail::scalar_as<int>(root["schema_version"], "schema_version");
  if (version != kSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(version), detail::line_of(root["schema_version"]));

  const Preset preset = root["preset"] ? parse_preset(detail::scalar_as<std::string>(root["preset"], "preset"),
                                                      detail::line_of(root["preset"]))
                                       : Preset::Example1;
  const Mode mode = root["mode"] ? parse_mode(detail::scalar_as<std::string>(root["mode"], "mode"),
                                              detail::line_of(root["mode"]))
                                 : Mode::TemporalSweep;
  ExperimentConfig c = default_config(preset, mode);

  if (const auto n = root["pairs"]) {
    if (!n.IsSequence()) throw ConfigError("'pairs' must be a list of [alpha, beta]", detail::line_of(n));
    c.pairs.clear();
    for (const auto& item : n) {
      if (!item.IsSequence() || item.size() != 2)
        throw ConfigError("each pair must be [alpha, beta]", detail::line_of(item));
      c.pairs.emplace_back(detail::scalar_as<double>(item[0], "pairs"), detail::scalar_as<double>(item[1], "pairs"));
    }
  }
  if (const auto n = root["steps"]) c.steps = detail::int_list(n, "steps");
  if (const auto n = root["grid"]) c.grid = detail::int_list(n, "grid");
  if (const auto n = root["ranks"]) {
    // the full-rank column is listed first regardless of where it appears
    c.ranks = detail::int_list(n, "ranks", true);
    std::stable_partition(c.ranks.begin(), c.ranks.end(), [](int r) { return r == kFullRank; });
  }
  if (const auto n = root["reference"]) {
    if (!n.IsMap()) throw ConfigError("'reference' must be a map with n and m", detail::line_of(n));
    c.reference.n = n["n"] ? detail::scalar_as<int>(n["n"], "reference.n") : 0;
    c.reference.m = n["m"] ? detail::scalar_as<int>(n["m"], "reference.m") : 0;
  }
  if (const auto n = root["rk4_substeps"]) c.rk4_substeps = detail::scalar_as<int>(n, "rk4_substeps");
  if (const auto n = root["dense_limit"]) c.dense_limit = detail::scalar_as<Index>(n, "dense_limit");
  if (const auto n = root["output"]) c.output = detail::scalar_as<std::string>(n, "output");
  if (const auto n = root["cache"]) c.cache = detail::scalar_as<std::string>(n, "cache");
  if (const auto n = root["seed"]) c.seed = detail::scalar_as<std::uint64_t>(n, "seed");
  if (const auto n = root["threads"]) c.threads = detail::scalar_as<int>(n, "threads");

  if (const auto n = root["params"]) {
    if (preset != Preset::Custom)
      throw ConfigError("'params' is only accepted with preset: custom", detail::line_of(n));
    if (!n.IsMap()) throw ConfigError("'params' must be a map", detail::line_of(n));
    auto read = [&](const char* key, double& dst) {
      if (n[key]) dst = detail::scalar_as<double>(n[key], std::string("params.") + key);
    };
    read("nu", c.base.nu);
    read("eta", c.base.eta);
    read("kappa", c.base.kappa);
    read("xi", c.base.xi);
    read("gamma", c.base.gamma);
    read("t_final", c.base.t_final);
    if (const auto d = n["domain"]) {
      if (!d.IsSequence() || d.size() != 4)
        throw ConfigError("params.domain must be [x_left, x_right, y_left, y_right]", detail::line_of(d));
      c.base.domain = {detail::scalar_as<double>(d[0], "domain"), detail::scalar_as<double>(d[1], "domain"),
                       detail::scalar_as<double>(d[2], "domain"), detail::scalar_as<double>(d[3], "domain")};
    }
  }
  if (const auto n = root["initial"]) {
    if (preset != Preset::Custom)
      throw ConfigError("'initial' is only accepted with preset: custom", detail::line_of(n));
    c.base.initial_condition = detail::parse_initial(n);
  }

  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

/// YAML text that parse_config maps back to an equal configuration.
inline std::string serialize_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "schema_version" << YAML::Value << c.schema_version;
  out << YAML::Key << "preset" << YAML::Value << to_string(c.preset);
  out << YAML::Key << "mode" << YAML::Value << to_string(c.mode);
  out << YAML::Key << "pairs" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& [a, b] : c.pairs) out << YAML::Flow << YAML::BeginSeq << a << b << YAML::EndSeq;
  out << YAML::EndSeq;
  out << YAML::Key << "steps" << YAML::Value << YAML::Flow << c.steps;
  out << YAML::Key << "grid" << YAML::Value << YAML::Flow << c.grid;
  out << YAML::Key << "ranks" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (int r : c.ranks) {
    if (r == kFullRank)
      out << "full";
    else
      out << r;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "reference" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "n"
      << YAML::Value << c.reference.n << YAML::Key << "m" << YAML::Value << c.reference.m << YAML::EndMap;
  out << YAML::Key << "rk4_substeps" << YAML::Value << c.rk4_substeps;
  out << YAML::Key << "dense_limit" << YAML::Value << static_cast<long long>(c.dense_limit);
  out << YAML::Key << "output" << YAML::Value << c.output;
  out << YAML::Key << "cache" << YAML::Value << c.cache;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "threads" << YAML::Value << c.threads;
  if (c.preset == Preset::Custom) {
    const FglParams& p = c.base;
    out << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "nu" << YAML::Value << p.nu << YAML::Key << "eta" << YAML::Value << p.eta;
    out << YAML::Key << "kappa" << YAML::Value << p.kappa << YAML::Key << "xi" << YAML::Value << p.xi;
    out << YAML::Key << "gamma" << YAML::Value << p.gamma << YAML::Key << "t_final" << YAML::Value << p.t_final;
    out << YAML::Key << "domain" << YAML::Value << YAML::Flow << YAML::BeginSeq << p.domain.x_left
        << p.domain.x_right << p.domain.y_left << p.domain.y_right << YAML::EndSeq;
    out << YAML::EndMap;
    out << YAML::Key << "initial" << YAML::Value;
    if (const auto* rr = std::get_if<initial::RankR>(&p.initial_condition)) {
      out << YAML::Flow << YAML::BeginMap << YAML::Key << "kind" << YAML::Value << "rank_r" << YAML::Key << "rank"
          << YAML::Value << rr->rank << YAML::EndMap;
    } else if (std::holds_alternative<initial::Example2>(p.initial_condition)) {
      out << "example2";
    } else {
      out << "example1";
    }
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace fgl::harness
