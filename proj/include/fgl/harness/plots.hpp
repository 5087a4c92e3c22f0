#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fgl/error.hpp"

namespace fgl::harness {

namespace fs = std::filesystem;

/// Relative singular-value cutoff that defines the plotted numerical rank.
inline constexpr double kRankCutoff = 1e-10;

struct PlotEmission {
  std::vector<fs::path> written;
  std::vector<std::string> missing;
};

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write " + p.string());
  os << text;
}

inline std::string svg_header(const std::string& svg_name) {
  return "set terminal svg size 800,600 enhanced font 'Helvetica,12'\nset output '" + svg_name + "'\n";
}

inline std::string convergence_script(const nlohmann::json& results) {
  const bool temporal = results.value("refinement", "M") == "M";
  const double t_final = results.value("t_final", 1.0);
  const auto domain = results.value("domain", std::vector<double>{0.0, 1.0, 0.0, 1.0});
  const double width = domain.size() == 4 ? domain[1] - domain[0] : 1.0;
  std::ostringstream gp;
  gp << svg_header("convergence.svg");
  gp << "set logscale xy\nset key outside right\nset grid\n";
  gp << "set xlabel '" << (temporal ? "tau" : "h") << "'\nset ylabel 'relerr'\n";
  gp << "set title 'Relative error vs " << (temporal ? "time step" : "mesh width") << "'\n";

  std::vector<std::string> titles;
  double anchor_x = 0.0, anchor_y = 0.0;
  const auto& ranks = results.at("ranks");
  int block = 0;
  for (std::size_t k = 0; k < ranks.size(); ++k) {
    std::string last_pair;
    for (const auto& row : results.at("rows")) {
      char pair[64];
      std::snprintf(pair, sizeof pair, "(%g,%g)", row.at("alpha").get<double>(), row.at("beta").get<double>());
      if (pair != last_pair) {
        if (!last_pair.empty()) gp << "EOD\n";
        gp << "$d" << block++ << " << EOD\n";
        titles.push_back(std::string(pair) + " r=" + ranks[k].get<std::string>());
        last_pair = pair;
      }
      const auto& cell = row.at("cells").at(k);
      if (cell.at("relerr").is_null()) continue;
      const int level = row.at("refinement").get<int>();
      const double spacing = temporal ? t_final / level : width / level;
      const double e = cell.at("relerr").get<double>();
      if (anchor_x == 0.0) {
        anchor_x = spacing;
        anchor_y = e;
      }
      char buf[96];
      std::snprintf(buf, sizeof buf, "%.10E %.10E\n", spacing, e);
      gp << buf;
    }
    if (!last_pair.empty()) gp << "EOD\n";
  }
  char guide[256];
  std::snprintf(guide, sizeof guide, "slope1(x) = %.10E * (x / %.10E)\nslope2(x) = %.10E * (x / %.10E)**2\n",
                anchor_y, anchor_x, anchor_y, anchor_x);
  gp << guide;
  gp << "plot ";
  for (int b = 0; b < block; ++b) gp << "$d" << b << " using 1:2 with linespoints title '" << titles[b] << "', ";
  gp << "slope1(x) with lines dashtype 2 lc rgb 'gray40' title 'slope 1', "
     << "slope2(x) with lines dashtype 3 lc rgb 'gray20' title 'slope 2'\n";
  return gp.str();
}

inline std::string singular_value_script(const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream gp;
  gp << svg_header("singular_values.svg");
  gp << "set logscale y\nset format y '10^{%L}'\nset grid\nset xlabel 'index'\nset ylabel 'singular value'\n";
  gp << "set title 'Singular values at t = T'\n$sv << EOD\n";
  double sigma1 = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 2) continue;
    if (sigma1 == 0.0) sigma1 = std::stod(rows[i][1]);
    gp << rows[i][0] << ' ' << rows[i][1] << '\n';
  }
  gp << "EOD\n";
  char cut[128];
  std::snprintf(cut, sizeof cut, "cutoff = %.10E\n", kRankCutoff * sigma1);
  gp << cut;
  gp << "plot $sv using 1:2 with points pt 7 title 'sigma_k', cutoff with lines dashtype 2 title 'rank cutoff "
        "1e-10 sigma_1'\n";
  return gp.str();
}

inline std::string numerical_rank_script(const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream gp;
  gp << svg_header("numerical_rank.svg");
  gp << "set grid\nset xlabel 't'\nset ylabel 'numerical rank'\nset title 'Numerical rank (cutoff 1e-10 sigma_1)'\n";
  gp << "$rank << EOD\n";
  if (!rows.empty()) {
    const auto& header = rows.front();
    std::size_t n_sigma = 0;
    for (const auto& h : header) n_sigma += h.rfind("sigma_", 0) == 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (r.size() < 2 + n_sigma) continue;
      const double s1 = std::stod(r[2]);
      int rank = 0;
      for (std::size_t k = 0; k < n_sigma; ++k) rank += std::stod(r[2 + k]) > kRankCutoff * s1;
      gp << r[1] << ' ' << rank << '\n';
    }
  }
  gp << "EOD\nplot $rank using 1:2 with steps title 'rank'\n";
  return gp.str();
}

inline std::string magnitude_script(const std::vector<std::vector<std::string>>& rows,
                                    const std::vector<double>& domain) {
  std::ostringstream gp;
  gp << svg_header("magnitude.svg");
  gp << "set view map\nset size ratio -1\nset palette rgbformulae 33,13,10\nset xlabel 'x'\nset ylabel 'y'\n";
  gp << "set xrange [" << domain[0] << ":" << domain[1] << "]\nset yrange [" << domain[2] << ":" << domain[3]
     << "]\n";
  gp << "set title '|u| at t = T'\n";
  // nonuniform matrix: first row = (count, x coords), following rows = (y, |u| along x)
  gp << "$mag << EOD\n";
  if (!rows.empty()) {
    const std::size_t nx = rows.size() - 1;
    const std::size_t ny = rows.front().size() - 1;
    gp << nx;
    for (std::size_t i = 1; i <= nx; ++i) gp << ' ' << rows[i][0];
    gp << '\n';
    for (std::size_t j = 1; j <= ny; ++j) {
      gp << rows.front()[j];
      for (std::size_t i = 1; i <= nx; ++i) gp << ' ' << rows[i][j];
      gp << '\n';
    }
  }
  gp << "EOD\nsplot $mag nonuniform matrix with pm3d notitle\n";
  return gp.str();
}

}  // namespace detail

/// Writes self-contained gnuplot scripts (SVG terminal) for whatever run outputs exist in `dir`:
/// convergence.gp from results.json, singular_values.gp / numerical_rank.gp / magnitude.gp from
/// the diagnostic dumps. Throws when none of the inputs is present.
inline PlotEmission emit_plots(const fs::path& dir) {
  PlotEmission out;
  const fs::path results = dir / "results.json";
  const fs::path sv = dir / "final_singular_values.csv";
  const fs::path steps = dir / "step_diagnostics.csv";
  const fs::path mag = dir / "magnitude.csv";
  const fs::path summary = dir / "run_summary.json";

  if (fs::exists(results)) {
    std::ifstream is(results);
    nlohmann::json j;
    is >> j;
    detail::write_text(dir / "convergence.gp", detail::convergence_script(j));
    out.written.push_back(dir / "convergence.gp");
  } else {
    out.missing.push_back(results.string());
  }

  if (fs::exists(sv)) {
    detail::write_text(dir / "singular_values.gp", detail::singular_value_script(detail::read_csv(sv)));
    out.written.push_back(dir / "singular_values.gp");
  } else {
    out.missing.push_back(sv.string());
  }

  if (fs::exists(steps)) {
    detail::write_text(dir / "numerical_rank.gp", detail::numerical_rank_script(detail::read_csv(steps)));
    out.written.push_back(dir / "numerical_rank.gp");
  } else {
    out.missing.push_back(steps.string());
  }

  if (fs::exists(mag) && fs::exists(summary)) {
    std::ifstream is(summary);
    nlohmann::json j;
    is >> j;
    const auto domain = j.at("domain").get<std::vector<double>>();
    detail::write_text(dir / "magnitude.gp", detail::magnitude_script(detail::read_csv(mag), domain));
    out.written.push_back(dir / "magnitude.gp");
  } else {
    if (!fs::exists(mag)) out.missing.push_back(mag.string());
    if (!fs::exists(summary)) out.missing.push_back(summary.string());
  }

  if (out.written.empty()) {
    std::string msg = "no plot inputs found in " + dir.string() + "; missing:";
    for (const auto& m : out.missing) msg += " " + m;
    throw Error(msg);
  }
  return out;
}

}  // namespace fgl::harness
