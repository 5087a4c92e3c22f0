#pragma once

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "fgl/flows.hpp"
#include "fgl/harness/config.hpp"
#include "fgl/lowrank.hpp"
#include "fgl/reference.hpp"
#include "fgl/reference_cache.hpp"

namespace fgl::harness {

namespace fs = std::filesystem;

/// Runs fn(0..count-1) on up to `threads` workers. Exceptions escape only through fn's own handling.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

struct Cell {
  std::optional<double> relerr;
  std::optional<double> rate;
  std::string error;  // non-empty when the cell failed

  bool failed() const { return !error.empty(); }
};

/// Rows keyed by (alpha, beta) x refinement, one (relerr, rate) column pair per rank.
struct TableArtifact {
  Mode mode = Mode::TemporalSweep;
  std::vector<int> ranks;
  struct Row {
    double alpha = 0.0;
    double beta = 0.0;
    int refinement = 0;  // M (temporal) or N (spatial)
    std::vector<Cell> cells;
  };
  std::vector<Row> rows;

  std::size_t failed_cells() const {
    std::size_t n = 0;
    for (const auto& r : rows)
      for (const auto& c : r.cells) n += c.failed();
    return n;
  }
  std::size_t total_cells() const { return rows.size() * ranks.size(); }
};

struct SweepResult {
  TableArtifact table;
  std::vector<fs::path> files;
};

/// Process exit status for a finished sweep: 0 clean, 2 every cell failed, 3 some cells failed.
inline int sweep_exit_status(const TableArtifact& t) {
  const std::size_t failed = t.failed_cells();
  if (failed == 0) return 0;
  return failed == t.total_cells() ? 2 : 3;
}

inline std::string format_relerr(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4E", v);
  return buf;
}

inline std::string format_rate(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string format_order(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::string rank_label(int r) { return r == kFullRank ? std::string("full") : std::to_string(r); }

/// Low-rank (or full-rank for kFullRank) solution at t_final on the given grid.
inline ComplexField solve_at(const FglParams& params, const Grid& grid, int rank, int rk4_substeps,
                             Index dense_limit) {
  const ComplexField u0 = initial_field(params, grid);
  if (rank == kFullRank) {
    const SplitStepper st = SplitStepper::make(params, grid, nonlinear::ClosedForm{}, dense_limit);
    return integrate_full(u0, st, grid.m).final_field;
  }
  const LowRankStepper st = LowRankStepper::make(params, grid, rk4_substeps, dense_limit);
  const Truncation tr = truncate_svd(u0, rank);
  return reconstruct(integrate_lowrank(tr.state, st, grid.m).final_state);
}

/// Computes every (alpha, beta) x refinement x rank cell, its observed rates, and writes
/// table.csv and results.json into cfg.output. Failing cells are recorded, not fatal.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.mode == Mode::SingleRun) throw ConfigError("run_sweep needs a temporal or spatial sweep config");
  const bool temporal = cfg.mode == Mode::TemporalSweep;
  const std::vector<int>& levels = temporal ? cfg.steps : cfg.grid;
  const ReferenceCache cache(cfg.cache);

  // references, one per (alpha, beta)
  std::vector<std::optional<ComplexField>> refs(cfg.pairs.size());
  std::vector<std::string> ref_errors(cfg.pairs.size());
  parallel_for(cfg.pairs.size(), cfg.threads, [&](std::size_t p) {
    try {
      refs[p] = reference_solution(cfg.params_for(cfg.pairs[p]), cfg.reference.n, cfg.reference.m, &cache,
                                   cfg.dense_limit);
    } catch (const std::exception& e) {
      ref_errors[p] = std::string("reference: ") + e.what();
    }
  });

  SweepResult result;
  TableArtifact& table = result.table;
  table.mode = cfg.mode;
  table.ranks = cfg.ranks;
  for (const auto& ab : cfg.pairs)
    for (int level : levels) table.rows.push_back({ab.first, ab.second, level, std::vector<Cell>(cfg.ranks.size())});

  parallel_for(table.rows.size(), cfg.threads, [&](std::size_t idx) {
    auto& row = table.rows[idx];
    const std::size_t p = idx / levels.size();
    if (!refs[p]) {
      for (auto& c : row.cells) c.error = ref_errors[p];
      return;
    }
    const FglParams params = cfg.params_for(cfg.pairs[p]);
    const int n = temporal ? cfg.grid.front() : row.refinement;
    const int m = temporal ? row.refinement : cfg.steps.front();
    for (std::size_t k = 0; k < cfg.ranks.size(); ++k) {
      try {
        const Grid grid = Grid::square(params, n, m);
        const ComplexField x = solve_at(params, grid, cfg.ranks[k], cfg.rk4_substeps, cfg.dense_limit);
        const ComplexField ref = temporal ? *refs[p] : restrict_to_grid(*refs[p], cfg.reference.n, n);
        row.cells[k].relerr = relerr(x, ref);
      } catch (const std::exception& e) {
        row.cells[k].error = e.what();
      }
    }
  });

  // rates down each (alpha, beta) x rank column
  for (std::size_t p = 0; p < cfg.pairs.size(); ++p) {
    const FglParams params = cfg.params_for(cfg.pairs[p]);
    for (std::size_t k = 0; k < cfg.ranks.size(); ++k)
      for (std::size_t l = 1; l < levels.size(); ++l) {
        const Cell& prev = table.rows[p * levels.size() + l - 1].cells[k];
        Cell& cur = table.rows[p * levels.size() + l].cells[k];
        if (!prev.relerr || !cur.relerr) continue;
        const auto spacing = [&](int level) {
          return temporal ? params.t_final / level : (params.domain.x_right - params.domain.x_left) / level;
        };
        cur.rate = observed_rate({{spacing(levels[l - 1]), *prev.relerr}, {spacing(levels[l]), *cur.relerr}},
                                 temporal ? RateAxis::Tau : RateAxis::H)
                       .front();
      }
  }

  fs::create_directories(cfg.output);
  const fs::path csv_path = fs::path(cfg.output) / "table.csv";
  {
    std::ofstream os(csv_path, std::ios::binary);
    const std::string level = temporal ? "M" : "N";
    const std::string rate = temporal ? "rate_tau" : "rate_h";
    os << "alpha,beta," << level;
    for (int r : table.ranks) os << ",r=" << rank_label(r) << " relerr,r=" << rank_label(r) << ' ' << rate;
    os << "\r\n";
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& row = table.rows[i];
      const bool first = i % levels.size() == 0;
      os << format_order(row.alpha) << ',' << format_order(row.beta) << ',' << row.refinement;
      for (const auto& c : row.cells) {
        os << ',' << (c.relerr ? format_relerr(*c.relerr) : std::string("ERR"));
        os << ',' << (c.rate ? format_rate(*c.rate) : std::string(first || !c.failed() ? "--" : "ERR"));
      }
      os << "\r\n";
    }
  }
  const fs::path json_path = fs::path(cfg.output) / "results.json";
  {
    nlohmann::json j;
    j["mode"] = to_string(cfg.mode);
    j["preset"] = to_string(cfg.preset);
    j["refinement"] = temporal ? "M" : "N";
    j["ranks"] = nlohmann::json::array();
    for (int r : table.ranks) j["ranks"].push_back(rank_label(r));
    j["reference"] = {{"n", cfg.reference.n}, {"m", cfg.reference.m}};
    j["domain"] = {cfg.base.domain.x_left, cfg.base.domain.x_right, cfg.base.domain.y_left, cfg.base.domain.y_right};
    j["t_final"] = cfg.base.t_final;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : table.rows) {
      nlohmann::json jr = {{"alpha", row.alpha}, {"beta", row.beta}, {"refinement", row.refinement}};
      jr["cells"] = nlohmann::json::array();
      for (std::size_t k = 0; k < row.cells.size(); ++k) {
        const Cell& c = row.cells[k];
        nlohmann::json jc = {{"rank", rank_label(table.ranks[k])}};
        jc["relerr"] = c.relerr ? nlohmann::json(*c.relerr) : nlohmann::json(nullptr);
        jc["rate"] = c.rate ? nlohmann::json(*c.rate) : nlohmann::json(nullptr);
        if (c.failed()) jc["error"] = c.error;
        jr["cells"].push_back(jc);
      }
      j["rows"].push_back(jr);
    }
    std::ofstream os(json_path, std::ios::binary);
    os << j.dump(2) << "\n";
  }
  result.files = {csv_path, json_path};
  return result;
}

/// One integration with per-step diagnostics, the input of dump_diagnostics.
struct SingleRun {
  FglParams params;
  Grid grid;
  int rank = kFullRank;
  ComplexField final_field;
  std::optional<LowRankTrajectory> trajectory;  // low-rank runs only
  std::optional<double> relerr;                 // when a reference was configured
};

inline SingleRun run_single(const ExperimentConfig& cfg, bool tangent_residual = false) {
  cfg.validate();
  SingleRun run;
  run.params = cfg.params_for(cfg.pairs.front());
  run.grid = Grid::square(run.params, cfg.grid.back(), cfg.steps.back());
  run.rank = cfg.ranks.back();
  const ComplexField u0 = initial_field(run.params, run.grid);
  if (run.rank == kFullRank) {
    const SplitStepper st = SplitStepper::make(run.params, run.grid, nonlinear::ClosedForm{}, cfg.dense_limit);
    run.final_field = integrate_full(u0, st, run.grid.m).final_field;
  } else {
    const LowRankStepper st = LowRankStepper::make(run.params, run.grid, cfg.rk4_substeps, cfg.dense_limit);
    LowRankDiagnosticsOptions opts;
    opts.tangent_residual = tangent_residual;
    run.trajectory = integrate_lowrank(truncate_svd(u0, run.rank).state, st, run.grid.m, opts);
    run.final_field = reconstruct(run.trajectory->final_state);
  }
  if (cfg.reference.n > 0 && cfg.reference.m > 0) {
    const ReferenceCache cache(cfg.cache);
    const ComplexField ref = reference_solution(run.params, cfg.reference.n, cfg.reference.m, &cache, cfg.dense_limit);
    run.relerr = relerr(run.final_field,
                        cfg.reference.n == run.grid.n_x ? ref : restrict_to_grid(ref, cfg.reference.n, run.grid.n_x));
  }
  return run;
}

/// Writes step_diagnostics.csv (low-rank runs), final_singular_values.csv (first min(60, r)
/// values; 60 for full-rank runs), magnitude.csv (|U| at t_final with x in the first column and
/// y in the header row) and run_summary.json.
inline std::vector<fs::path> dump_diagnostics(const SingleRun& run, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  char buf[64];

  if (run.trajectory) {
    const fs::path p = dir / "step_diagnostics.csv";
    std::ofstream os(p, std::ios::binary);
    write_diagnostics_csv(os, run.trajectory->steps);
    written.push_back(p);
  }

  {
    const RVector sv = Eigen::BDCSVD<CMatrix>(run.final_field).singularValues();
    const Index limit = run.rank == kFullRank ? 60 : std::min<Index>(60, run.rank);
    const fs::path p = dir / "final_singular_values.csv";
    std::ofstream os(p, std::ios::binary);
    os << "index,sigma\r\n";
    for (Index i = 0; i < std::min<Index>(limit, sv.size()); ++i) {
      std::snprintf(buf, sizeof buf, "%.10E", sv(i));
      os << i + 1 << ',' << buf << "\r\n";
    }
    written.push_back(p);
  }

  {
    const fs::path p = dir / "magnitude.csv";
    std::ofstream os(p, std::ios::binary);
    os << "x\\y";
    for (Index j = 0; j < run.grid.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.10g", run.grid.y(j));
      os << ',' << buf;
    }
    os << "\r\n";
    for (Index i = 0; i < run.grid.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.10g", run.grid.x(i));
      os << buf;
      for (Index j = 0; j < run.grid.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.8E", std::abs(run.final_field(i, j)));
        os << ',' << buf;
      }
      os << "\r\n";
    }
    written.push_back(p);
  }

  {
    const fs::path p = dir / "run_summary.json";
    nlohmann::json j = {{"alpha", run.params.alpha},
                        {"beta", run.params.beta},
                        {"n", run.grid.n_x},
                        {"m", run.grid.m},
                        {"rank", rank_label(run.rank)},
                        {"t_final", run.params.t_final},
                        {"domain",
                         {run.params.domain.x_left, run.params.domain.x_right, run.params.domain.y_left,
                          run.params.domain.y_right}},
                        {"initial", initial_condition_name(run.params.initial_condition)}};
    j["relerr"] = run.relerr ? nlohmann::json(*run.relerr) : nlohmann::json(nullptr);
    if (run.trajectory) {
      std::size_t degenerate = 0;
      for (const auto& d : run.trajectory->steps) degenerate += d.degenerate;
      j["degenerate_steps"] = degenerate;
    }
    std::ofstream os(p, std::ios::binary);
    os << j.dump(2) << "\n";
    written.push_back(p);
  }
  return written;
}

}  // namespace fgl::harness
