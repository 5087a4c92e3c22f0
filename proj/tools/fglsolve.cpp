// fglsolve: runs, sweeps and diagnostics for the full-rank and fixed-rank split solvers.
//
//   fglsolve sweep --preset example1 --mode temporal --out out/t1
//   fglsolve diag  --config configs/example1_single.yaml
//   fglsolve plot  --out out/t1
//
// Exit codes: 0 success, 1 config or usage error, 2 numerical failure in all cells, 3 partial failures.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "fgl/harness/config.hpp"
#include "fgl/harness/plots.hpp"
#include "fgl/harness/sweep.hpp"

namespace {

using namespace fgl::harness;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitAllFailed = 2;

struct Options {
  std::string config;
  std::string preset;
  std::string mode;
  std::string out;
  int threads = 0;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig resolve(const Options& o, Mode fallback_mode) {
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = load_config(o.config);
  } else {
    const Preset preset = parse_preset(o.preset.empty() ? "example1" : o.preset);
    cfg = default_config(preset, o.mode.empty() ? fallback_mode : parse_mode(o.mode));
  }
  if (!o.out.empty()) cfg.output = o.out;
  if (o.threads > 0) cfg.threads = o.threads;
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

void print_table(const TableArtifact& t) {
  for (const auto& row : t.rows) {
    std::cout << "(" << format_order(row.alpha) << ", " << format_order(row.beta) << ") "
              << (t.mode == Mode::TemporalSweep ? "M=" : "N=") << row.refinement;
    for (std::size_t k = 0; k < row.cells.size(); ++k) {
      const Cell& c = row.cells[k];
      std::cout << "  r=" << rank_label(t.ranks[k]) << ": "
                << (c.relerr ? format_relerr(*c.relerr) : std::string("ERR")) << " "
                << (c.rate ? format_rate(*c.rate) : std::string("--"));
    }
    std::cout << "\n";
  }
}

int single(const Options& o, bool diagnostics) {
  ExperimentConfig cfg = resolve(o, Mode::SingleRun);
  const SingleRun run = run_single(cfg, diagnostics);
  const auto files = dump_diagnostics(run, cfg.output);
  std::cout << "N=" << run.grid.n_x << " M=" << run.grid.m << " r=" << rank_label(run.rank);
  if (run.relerr) std::cout << " relerr=" << format_relerr(*run.relerr);
  std::cout << "\n";
  for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
  return kExitOk;
}

int sweep(const Options& o) {
  const ExperimentConfig cfg = resolve(o, Mode::TemporalSweep);
  const SweepResult res = run_sweep(cfg);
  print_table(res.table);
  for (const auto& f : res.files) std::cout << "wrote " << f.string() << "\n";
  for (const auto& row : res.table.rows)
    for (const auto& c : row.cells)
      if (c.failed()) std::cerr << "cell failed: " << c.error << "\n";
  return sweep_exit_status(res.table);
}

int plot(const Options& o) {
  const std::string dir = o.out.empty() ? (o.config.empty() ? std::string("out") : load_config(o.config).output) : o.out;
  PlotEmission em;
  try {
    em = emit_plots(dir);
  } catch (const fgl::Error& e) {
    std::cerr << "plot: " << e.what() << "\n";
    return kExitConfig;
  }
  for (const auto& f : em.written) std::cout << "wrote " << f.string() << "\n";
  for (const auto& m : em.missing) std::cout << "skipped (missing input) " << m << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fixed-rank split-step solver for the 2D fractional Ginzburg-Landau model"};
  app.require_subcommand(1);
  Options opts;
  auto add_common = [&opts](CLI::App* sub) {
    sub->add_option("--config", opts.config, "YAML experiment config");
    sub->add_option("--preset", opts.preset, "example1 | example2 (used without --config)")
        ->check(CLI::IsMember({"example1", "example2"}));
    sub->add_option("--mode", opts.mode, "temporal | spatial | single (used without --config)")
        ->check(CLI::IsMember({"temporal", "spatial", "single"}));
    sub->add_option("--out", opts.out, "output directory");
    sub->add_option("--threads", opts.threads, "concurrent sweep cells")->check(CLI::PositiveNumber);
    sub->add_option_function<std::uint64_t>("--seed", [&opts](const std::uint64_t& s) { opts.seed = s; },
                                            "seed for random initial data");
  };
  CLI::App* run_cmd = app.add_subcommand("run", "single integration; writes final-state dumps");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "temporal or spatial convergence sweep");
  CLI::App* diag_cmd = app.add_subcommand("diag", "single integration with per-step diagnostics");
  CLI::App* plot_cmd = app.add_subcommand("plot", "emit gnuplot scripts for an output directory");
  for (CLI::App* sub : {run_cmd, sweep_cmd, diag_cmd, plot_cmd}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) return single(opts, false);
    if (diag_cmd->parsed()) return single(opts, true);
    if (sweep_cmd->parsed()) return sweep(opts);
    return plot(opts);
  } catch (const fgl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fgl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAllFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAllFailed;
  }
}
