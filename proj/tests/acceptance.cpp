// Acceptance suite: runs every criterion at its pinned tolerance and prints one
// PASS/FAIL line each. Exits 1 if any criterion fails.
//
//   acceptance            all criteria
//   acceptance 3 9 14     a subset

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fgl/fgl.hpp"
#include "fgl/harness/config.hpp"
#include "fgl/harness/sweep.hpp"

using namespace fgl;
using namespace fgl::harness;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

CMatrix random_field(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  CMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = Complex(dist(rng), dist(rng));
  return m;
}

double rel(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); }

const fs::path& work_dir() {
  static const fs::path d = [] {
    fs::path p = FGL_TEST_TMP;
    fs::create_directories(p);
    return p;
  }();
  return d;
}

ExperimentConfig sweep_config(Preset preset, Mode mode, std::vector<int> ranks, const std::string& tag) {
  ExperimentConfig c = default_config(preset, mode);
  c.ranks = std::move(ranks);
  c.output = (work_dir() / tag).string();
  c.cache = (work_dir() / "cache").string();
  c.validate();
  return c;
}

// Sweeps shared between criteria are run once.
const SweepResult& example1_temporal() {
  static const SweepResult r =
      run_sweep(sweep_config(Preset::Example1, Mode::TemporalSweep, {1, 3, 4, 5}, "ex1_temporal"));
  return r;
}

std::size_t rank_column(const TableArtifact& t, int rank) {
  for (std::size_t k = 0; k < t.ranks.size(); ++k)
    if (t.ranks[k] == rank) return k;
  throw std::runtime_error("rank column missing");
}

void check_rates(Outcome& out, const TableArtifact& t, const std::vector<int>& ranks, double lo, double hi,
                 bool final_only) {
  double min_rate = 1e300, max_rate = -1e300;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const bool last_of_pair = i + 1 == t.rows.size() || t.rows[i + 1].alpha != row.alpha ||
                              t.rows[i + 1].beta != row.beta;
    for (int r : ranks) {
      const Cell& c = row.cells[rank_column(t, r)];
      out.check(!c.failed(), "cell failed: " + c.error);
      if (!c.rate || (final_only && !last_of_pair)) continue;
      min_rate = std::min(min_rate, *c.rate);
      max_rate = std::max(max_rate, *c.rate);
      out.check(*c.rate >= lo && *c.rate <= hi,
                "rate " + fmt("%.4f", *c.rate) + " at (" + fmt("%g", row.alpha) + "," + fmt("%g", row.beta) +
                    ") level " + std::to_string(row.refinement) + " r=" + rank_label(r));
    }
  }
  out.note("rates in [" + fmt("%.4f", min_rate) + ", " + fmt("%.4f", max_rate) + "]");
}

// 1
Outcome stencil_classical_limit() {
  Outcome out;
  const FracStencil st = stencil_coeffs(2.0, 50);
  double dev = std::abs(st[0] - 2.0) + std::abs(st[1] + 1.0);
  for (std::size_t k = 2; k < st.size(); ++k) dev = std::max(dev, std::abs(st[k]));
  out.check(dev <= 1e-12, "stencil deviation " + fmt("%.2e", dev));
  const Index n = 31;
  const double h = 0.3;
  const Complex d(1.0, 0.5);
  const FracOperator op(Axis::X, n, h, 2.0, d);
  CMatrix tri = CMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    tri(i, i) = -2.0;
    if (i > 0) tri(i, i - 1) = 1.0;
    if (i + 1 < n) tri(i, i + 1) = 1.0;
  }
  tri *= d / (h * h);
  const double op_dev = (op.dense() - tri).cwiseAbs().maxCoeff() / tri.cwiseAbs().maxCoeff();
  out.check(op_dev <= 1e-12, "operator deviation " + fmt("%.2e", op_dev));
  out.note("stencil dev " + fmt("%.1e", dev) + ", operator dev " + fmt("%.1e", op_dev));
  return out;
}

// 2
Outcome stencil_properties() {
  Outcome out;
  for (double mu : {1.2, 1.5, 1.7, 1.9}) {
    const FracStencil st = stencil_coeffs(mu, 5000);
    out.check(st[0] > 0.0, "g_0 > 0 at mu=" + fmt("%g", mu));
    bool negative = true, monotone = true;
    for (std::size_t k = 1; k < st.size(); ++k) {
      negative &= st[k] < 0.0;
      if (k + 1 < st.size()) monotone &= st[k + 1] >= st[k];
    }
    out.check(negative, "g_k < 0 for k >= 1 at mu=" + fmt("%g", mu));
    out.check(monotone, "|g_k| decreasing at mu=" + fmt("%g", mu));
    double prev = st[0];
    bool sums_ok = true;
    for (std::size_t kk = 1; kk <= 5000; ++kk) {
      const double s = st.partial_sum(kk);
      sums_ok &= s > 0.0 && s <= prev;
      prev = s;
    }
    out.check(sums_ok, "partial sums positive and decreasing at mu=" + fmt("%g", mu));
    const FracOperator op(Axis::X, 40, 0.5, mu, Complex(1.0, 1.0));
    const CMatrix a = op.dense();
    out.check((a - a.transpose()).norm() == 0.0, "operator symmetry at mu=" + fmt("%g", mu));
  }
  out.note("s_5000(1.5) = " + fmt("%.6e", stencil_coeffs(1.5, 5000).partial_sum(5000)));
  return out;
}

// 3
Outcome structured_apply() {
  Outcome out;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 8 + (trial * 7) % 57;
    const double mu = 1.05 + 0.9 * trial / 49.0;
    const FracOperator op(trial % 2 ? Axis::Y : Axis::X, n, 20.0 / (n + 1), mu, Complex(1.0, 1.0));
    const CMatrix u = random_field(n, 3 + trial % 4, 1000 + trial);
    worst = std::max(worst, rel(op.apply(u, Side::Left), CMatrix(op.dense() * u)));
    const CMatrix w = random_field(5, n, 2000 + trial);
    worst = std::max(worst, rel(op.apply(w, Side::Right), CMatrix(w * op.dense())));
  }
  out.check(worst <= 1e-12, "FFT vs dense " + fmt("%.2e", worst));
  out.note("max relative deviation " + fmt("%.2e", worst));
  return out;
}

// 4
Outcome exponential_backends() {
  Outcome out;
  double worst = 0.0;
  for (int n : {16, 64, 128})
    for (double mu : {1.2, 1.5, 1.9})
      for (double tau : {1e-3, 1e-1}) {
        const FracOperator op(Axis::X, n - 1, 20.0 / n, mu, Complex(1.0, 1.0));
        const CMatrix block = random_field(n - 1, 5, static_cast<std::uint64_t>(n * 10 + mu * 10));
        const CMatrix dense = dense_expm(op, tau) * block;
        worst = std::max(worst, rel(ExpBackend::krylov(op, tau).apply(block), dense));
      }
  out.check(worst <= 1e-8, "Krylov vs dense " + fmt("%.2e", worst));

  double ratio = 0.0;
  const FglParams p = FglParams::example1(1.2, 1.9);
  const Grid g = Grid::square(p, 64, 10);
  const FracOperator ox = build_operator(p, g, Axis::X), oy = build_operator(p, g, Axis::Y);
  for (double tau : {1e-3, 1e-1}) {
    const ExpBackend bx = ExpBackend::dense(ox, tau), by = ExpBackend::dense(oy, tau);
    for (int trial = 0; trial < 100; ++trial) {
      const CMatrix z = random_field(63, 63, 5000 + trial);
      ratio = std::max(ratio, linear_flow(z, bx, by).norm() / z.norm());
    }
  }
  out.check(ratio <= 1.0 + 1e-10, "contraction ratio " + fmt("%.12f", ratio));
  out.note("Krylov dev " + fmt("%.2e", worst) + ", max ||flow Z||/||Z|| = " + fmt("%.6f", ratio));
  return out;
}

// 5
Outcome nonlinear_exactness() {
  Outcome out;
  double worst = 0.0, semi = 0.0;
  for (const FglParams& p : {FglParams::example1(), FglParams::example2()}) {
    const Nonlinearity g = Nonlinearity::from(p);
    const CMatrix u = random_field(20, 20, 7);
    for (double tau : {1e-2, 1e-1}) {
      const CMatrix exact = nonlinear_flow(u, tau, g);
      const CMatrix rk = nonlinear_flow(u, tau, g, nonlinear::RK4{10000});
      worst = std::max(worst, (exact - rk).cwiseAbs().maxCoeff());
      const CMatrix two = nonlinear_flow(nonlinear_flow(u, 0.3 * tau, g), 0.7 * tau, g);
      semi = std::max(semi, (two - exact).cwiseAbs().maxCoeff());
    }
  }
  out.check(worst <= 1e-10, "closed form vs RK4 " + fmt("%.2e", worst));
  out.check(semi <= 1e-10, "semiflow " + fmt("%.2e", semi));
  out.note("closed form vs RK4 " + fmt("%.2e", worst) + ", semiflow " + fmt("%.2e", semi));
  return out;
}

// 6
Outcome commuting_case() {
  Outcome out;
  FglParams p = FglParams::example2(1.3, 1.7);
  p.kappa = 0.0;
  p.xi = 0.0;
  p.gamma = 0.5;
  p.initial_condition = initial::RankR{4, 11};
  const Grid g = Grid::square(p, 32, 8);
  const CMatrix u0 = initial_field(p, g);
  const FracOperator ox = build_operator(p, g, Axis::X), oy = build_operator(p, g, Axis::Y);
  const CMatrix exact = std::exp(p.gamma * p.t_final) *
                        linear_flow(u0, ExpBackend::dense(ox, p.t_final), ExpBackend::dense(oy, p.t_final));
  const double e_full = rel(integrate_full(u0, SplitStepper::make(p, g), g.m).final_field, exact);
  const double e_low = rel(
      reconstruct(integrate_lowrank(truncate_svd(u0, 4).state, LowRankStepper::make(p, g, 4), g.m).final_state),
      exact);
  out.check(e_full <= 1e-8, "full-rank " + fmt("%.2e", e_full));
  out.check(e_low <= 1e-8, "low-rank " + fmt("%.2e", e_low));
  out.note("full " + fmt("%.2e", e_full) + ", low-rank " + fmt("%.2e", e_low));
  return out;
}

// 7
Outcome projection_properties() {
  Outcome out;
  double idem = 0.0, adj = 0.0, fix = 0.0, formula = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 16 + 4 * trial;
    const CMatrix x0 = random_field(n - 1, 5, 300 + trial) * random_field(5, n - 1, 400 + trial);
    const LowRankState x = truncate_svd(x0, 5).state;
    const CMatrix w1 = random_field(n - 1, n - 1, 500 + trial), w2 = random_field(n - 1, n - 1, 600 + trial);
    const CMatrix p1 = tangent_project(x, w1).dense(), p2 = tangent_project(x, w2).dense();
    idem = std::max(idem, rel(tangent_project(x, p1).dense(), p1));
    const Complex a = (p1.conjugate().cwiseProduct(w2)).sum(), b = (w1.conjugate().cwiseProduct(p2)).sum();
    adj = std::max(adj, std::abs(a - b) / (w1.norm() * w2.norm()));
    const CMatrix xr = reconstruct(x);
    fix = std::max(fix, rel(tangent_project(x, xr).dense(), xr));
    const CMatrix ps = x.s * x.s.adjoint(), pv = x.v * x.v.adjoint();
    formula = std::max(formula, (p1 - (ps * w1 - ps * w1 * pv + w1 * pv)).norm() / w1.norm());
  }
  out.check(idem <= 1e-12, "idempotence " + fmt("%.2e", idem));
  out.check(adj <= 1e-12, "self-adjointness " + fmt("%.2e", adj));
  out.check(fix <= 1e-12, "P(X)X = X " + fmt("%.2e", fix));
  out.check(formula <= 1e-12, "dense formula " + fmt("%.2e", formula));
  out.note("idem " + fmt("%.1e", idem) + ", adj " + fmt("%.1e", adj) + ", fix " + fmt("%.1e", fix) + ", formula " +
           fmt("%.1e", formula));
  return out;
}

// 8
Outcome full_rank_limit() {
  Outcome out;
  double worst = 0.0;
  for (const FglParams& base : {FglParams::example1(1.5, 1.5), FglParams::example2(1.7, 1.3)}) {
    FglParams p = base;
    p.t_final = 0.1;
    const Grid g = Grid::square(p, 16, 10);
    const int substeps = 4;
    const CMatrix u0 = initial_field(p, g);
    const CMatrix full = integrate_full(u0, SplitStepper::make(p, g, nonlinear::RK4{substeps}), g.m).final_field;
    const auto low = integrate_lowrank(truncate_svd(u0, g.rows()).state, LowRankStepper::make(p, g, substeps), g.m);
    worst = std::max(worst, rel(reconstruct(low.final_state), full));
  }
  out.check(worst <= 1e-6, "difference " + fmt("%.2e", worst));
  out.note("max relative difference " + fmt("%.2e", worst) + " (tau = 1e-2, 4 RK4 substeps)");
  return out;
}

// 9
Outcome temporal_order() {
  Outcome out;
  const SweepResult& e1 = example1_temporal();
  check_rates(out, e1.table, {3, 4, 5}, 0.7, 1.3, false);
  const SweepResult e2 = run_sweep(sweep_config(Preset::Example2, Mode::TemporalSweep, {6, 8}, "ex2_temporal"));
  check_rates(out, e2.table, {6, 8}, 0.7, 1.3, false);
  return out;
}

// 10
Outcome spatial_order() {
  Outcome out;
  const SweepResult e1 = run_sweep(sweep_config(Preset::Example1, Mode::SpatialSweep, {5}, "ex1_spatial"));
  check_rates(out, e1.table, {5}, 1.6, 2.4, true);
  const SweepResult e2 = run_sweep(sweep_config(Preset::Example2, Mode::SpatialSweep, {8}, "ex2_spatial"));
  check_rates(out, e2.table, {8}, 1.6, 2.4, true);
  return out;
}

// 11
Outcome rank_starvation() {
  Outcome out;
  const TableArtifact& t = example1_temporal().table;
  const std::size_t c1 = rank_column(t, 1), c5 = rank_column(t, 5);
  double worst_r1 = 0.0, worst_r5 = 1e300;
  for (std::size_t i = 0; i < t.rows.size(); i += 3) {
    const double r1 = *t.rows[i].cells[c1].relerr / *t.rows[i + 2].cells[c1].relerr;
    const double r5 = *t.rows[i].cells[c5].relerr / *t.rows[i + 2].cells[c5].relerr;
    worst_r1 = std::max(worst_r1, r1);
    worst_r5 = std::min(worst_r5, r5);
    out.check(r1 <= 2.0, "r=1 decrease " + fmt("%.2f", r1) + "x at alpha=" + fmt("%g", t.rows[i].alpha));
    out.check(r5 >= 8.0, "r=5 decrease " + fmt("%.2f", r5) + "x at alpha=" + fmt("%g", t.rows[i].alpha));
  }
  out.note("M=16->256 decrease: r=1 at most " + fmt("%.2f", worst_r1) + "x, r=5 at least " + fmt("%.2f", worst_r5) +
           "x");
  return out;
}

struct SufficiencyRuns {
  double relerr_full = 0.0;
  double relerr_r10 = 0.0;
  double floor = 0.0;
  double sv_ratio = 0.0;
  bool cond_finite = true;
  double max_cond = 0.0;
  std::size_t degenerate_steps = 0;
};

const SufficiencyRuns& sufficiency() {
  static const SufficiencyRuns s = [] {
    SufficiencyRuns r;
    const FglParams p = FglParams::example1(1.5, 1.5);
    const Grid g = Grid::square(p, 128, 256);
    const ReferenceCache cache(work_dir() / "cache");
    const CMatrix ref = reference_solution(p, 128, 4096, &cache);
    const CMatrix u0 = initial_field(p, g);
    const CMatrix full = integrate_full(u0, SplitStepper::make(p, g), g.m).final_field;
    const auto low = integrate_lowrank(truncate_svd(u0, 10).state, LowRankStepper::make(p, g), g.m);
    r.relerr_full = relerr(full, ref);
    r.relerr_r10 = relerr(reconstruct(low.final_state), ref);
    const Truncation best = truncate_svd(full, 10);
    r.floor = best.discarded / ref.norm();
    r.sv_ratio = best.singular_values(59) / best.singular_values(0);
    for (const auto& d : low.steps) {
      r.cond_finite &= std::isfinite(d.condition) && d.singular_values.allFinite();
      r.max_cond = std::max(r.max_cond, d.condition);
      r.degenerate_steps += d.degenerate;
    }
    return r;
  }();
  return s;
}

// 12
Outcome lowrank_sufficiency() {
  Outcome out;
  const SufficiencyRuns& s = sufficiency();
  const double bound = 1.05 * s.relerr_full + s.floor;
  out.check(s.relerr_r10 <= bound, "relerr(r=10) " + fmt("%.4e", s.relerr_r10) + " > " + fmt("%.4e", bound));
  out.check(s.sv_ratio <= 1e-6, "sigma_60/sigma_1 = " + fmt("%.2e", s.sv_ratio));
  out.note("relerr r=10 " + fmt("%.4e", s.relerr_r10) + ", full " + fmt("%.4e", s.relerr_full) + ", floor " +
           fmt("%.2e", s.floor) + ", sigma_60/sigma_1 " + fmt("%.2e", s.sv_ratio));
  return out;
}

// 13
Outcome over_approximation() {
  Outcome out;
  const SufficiencyRuns& s = sufficiency();
  out.check(s.cond_finite, "non-finite cond(Sigma) diagnostics");
  out.check(std::isfinite(s.relerr_r10), "r=10 run did not produce a finite solution");
  out.note("max cond(Sigma) " + fmt("%.2e", s.max_cond) + ", flagged steps " + std::to_string(s.degenerate_steps));
  return out;
}

// 14
Outcome determinism() {
  Outcome out;
  std::string csv[2];
  for (int k = 0; k < 2; ++k) {
    ExperimentConfig c = default_config(Preset::Example2, Mode::TemporalSweep);
    c.pairs = {{1.5, 1.5}, {1.9, 1.2}};
    c.grid = {64};
    c.steps = {8, 16, 32};
    c.ranks = {kFullRank, 2, 4};
    c.reference = {64, 512};
    c.threads = k + 1;
    c.output = (work_dir() / ("determinism_" + std::to_string(k))).string();
    c.cache = (work_dir() / ("determinism_cache_" + std::to_string(k))).string();
    fs::remove_all(c.cache);
    run_sweep(c);
    std::ifstream is(fs::path(c.output) / "table.csv", std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    csv[k] = ss.str();
  }
  out.check(!csv[0].empty() && csv[0] == csv[1], "table.csv differs between identical sweeps");
  out.note(std::to_string(csv[0].size()) + " bytes identical (threads 1 and 2, fresh caches)");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "stencil classical limit", 1, stencil_classical_limit},
      {2, "stencil sign/symmetry/sum properties", 1, stencil_properties},
      {3, "structured-apply fidelity", 5, structured_apply},
      {4, "exponential backends", 30, exponential_backends},
      {5, "nonlinear flow exactness", 10, nonlinear_exactness},
      {6, "commuting-case exactness", 10, commuting_case},
      {7, "projection properties", 5, projection_properties},
      {8, "full-rank limit equivalence", 10, full_rank_limit},
      {9, "temporal order ~ 1", 20 * 60, temporal_order},
      {10, "spatial order ~ 2", 20 * 60, spatial_order},
      {11, "rank-starvation stagnation", 20 * 60, rank_starvation},
      {12, "low-rank sufficiency", 10 * 60, lowrank_sufficiency},
      {13, "robustness to over-approximation", 10 * 60, over_approximation},
      {14, "determinism", 2 * 60, determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) o.check(false, "runtime " + fmt("%.1f", secs) + " s over budget " + fmt("%g", c.budget_s) + " s");
    failed += !o.pass;
    std::printf("[%s] %2d %-36s %8.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
