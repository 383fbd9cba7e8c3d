#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "compete/csv.hpp"
#include "compete/harness.hpp"

namespace fs = std::filesystem;

namespace compete {

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string cell_color(const std::string& token, size_t index) {
  if (token == "SA") return "#e6a007";
  if (token == "Sh-Decent") return "#2458d8";
  if (token == "Sh-Decent-Comp") return "#d62728";
  if (token == "Sp-Decent-Comp") return "#2ca02c";
  if (token == "Sh-Cent-Comp") return "#8c564b";
  if (token == "Sh-Cent") return "#9467bd";
  if (token == "Sh-Decent-Noi") return "#17becf";
  static const char* fallback[] = {"#1f77b4", "#ff7f0e", "#bcbd22", "#e377c2",
                                   "#7f7f7f", "#aec7e8"};
  return fallback[index % 6];
}

std::string fmt(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

std::string fmt2(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

void write_svg(const GridSummary& summary, const fs::path& path) {
  const std::vector<CellSummary>& cells = summary.cells;
  size_t max_len = 0;
  double ymin = 0.0, ymax = 0.0;
  bool any = false;
  for (const CellSummary& cell : cells) {
    for (size_t r = 0; r < cell.curve_mean.size(); ++r) {
      const double lo = cell.curve_mean[r] - cell.curve_std[r];
      const double hi = cell.curve_mean[r] + cell.curve_std[r];
      if (!any) {
        ymin = lo;
        ymax = hi;
        any = true;
      } else {
        ymin = std::min(ymin, lo);
        ymax = std::max(ymax, hi);
      }
    }
    max_len = std::max(max_len, cell.curve_mean.size());
  }
  if (!any) {
    ymin = 0.0;
    ymax = 1.0;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  const double xmax = max_len > 1 ? static_cast<double>(max_len - 1) : 1.0;

  const double W = 880, H = 540;
  const double L = 70, R = 640, T = 40, B = 490;
  const auto X = [&](double it) { return L + (R - L) * (it / xmax); };
  const auto Y = [&](double v) { return B - (B - T) * ((v - ymin) / (ymax - ymin)); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
      << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H
      << "\" fill=\"#ffffff\"/>\n";
  svg << "<text x=\"" << L << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\">"
      << xml_escape(summary.name + ": eval episode reward, " + summary.env_name)
      << "</text>\n";

  // axes
  svg << "<line x1=\"" << L << "\" y1=\"" << B << "\" x2=\"" << R << "\" y2=\"" << B
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << B
      << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double it = std::round(xmax * k / 4.0);  // iterations are integers
    const double v = ymin + (ymax - ymin) * k / 4.0;
    svg << "<line x1=\"" << X(it) << "\" y1=\"" << B << "\" x2=\"" << X(it) << "\" y2=\""
        << B + 5 << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << X(it) << "\" y=\"" << B + 20
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
        << fmt(it) << "</text>\n";
    svg << "<line x1=\"" << L - 5 << "\" y1=\"" << Y(v) << "\" x2=\"" << L << "\" y2=\""
        << Y(v) << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << L - 8 << "\" y=\"" << Y(v) + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt(v)
        << "</text>\n";
  }
  svg << "<text x=\"" << (L + R) / 2 << "\" y=\"" << B + 38
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">iteration"
      << "</text>\n";

  // one band + mean line per cell
  for (size_t c = 0; c < cells.size(); ++c) {
    const CellSummary& cell = cells[c];
    if (cell.curve_mean.empty()) continue;
    const std::string color = cell_color(cell.mode_token, c);

    svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
    for (size_t r = 0; r < cell.curve_mean.size(); ++r)
      svg << fmt(X(static_cast<double>(r))) << ","
          << fmt(Y(cell.curve_mean[r] + cell.curve_std[r])) << " ";
    for (size_t r = cell.curve_mean.size(); r-- > 0;)
      svg << fmt(X(static_cast<double>(r))) << ","
          << fmt(Y(cell.curve_mean[r] - cell.curve_std[r])) << " ";
    svg << "\"/>\n";

    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (size_t r = 0; r < cell.curve_mean.size(); ++r)
      svg << fmt(X(static_cast<double>(r))) << "," << fmt(Y(cell.curve_mean[r])) << " ";
    svg << "\"/>\n";
  }

  // legend
  double ly = T + 8;
  for (size_t c = 0; c < cells.size(); ++c) {
    const CellSummary& cell = cells[c];
    const std::string color = cell_color(cell.mode_token, c);
    svg << "<rect x=\"" << R + 16 << "\" y=\"" << ly - 9 << "\" width=\"14\" height=\"10\" fill=\""
        << color << "\"/>\n";
    svg << "<text x=\"" << R + 36 << "\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(cell.mode)
        << (cell.n_effective == 0 ? " (no data)" : "") << "</text>\n";
    ly += 18;
  }

  svg << "</svg>\n";

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << svg.str();
}

}  // namespace

void emit_report(const GridSummary& summary) {
  if (summary.cells.empty()) throw std::invalid_argument("empty summary");
  fs::create_directories(summary.out_dir);

  const std::string svg_name = "reward_" + summary.env_name + ".svg";
  write_svg(summary, fs::path(summary.out_dir) / svg_name);

  std::ostringstream md;
  md << "# " << summary.name << " comparison report\n\n";
  md << "Environment: " << summary.env_name << ". Post-convergence window: final "
     << static_cast<int>(kConvergenceWindow * 100)
     << "% of iterations. Scores are evaluation episode rewards "
        "(deterministic mean action), aggregated across seeds.\n\n";

  const CellSummary* baseline = nullptr;
  for (const CellSummary& cell : summary.cells)
    if (cell.n_effective > 0) {
      baseline = &cell;
      break;
    }

  md << "| mode | agents | seeds | completed | mean | std |";
  if (baseline) md << " delta vs " << baseline->mode << " |";
  md << "\n|---|---|---|---|---|---|";
  if (baseline) md << "---|";
  md << "\n";
  for (const CellSummary& cell : summary.cells) {
    md << "| " << cell.mode << " | " << cell.n_agents << " | " << cell.n_seeds << " | "
       << cell.n_effective << " | ";
    if (cell.n_effective > 0)
      md << fmt2(cell.mean) << " | " << fmt2(cell.stddev) << " |";
    else
      md << "- | - |";
    if (baseline) {
      if (cell.n_effective > 0)
        md << " " << fmt2(cell.mean - baseline->mean) << " |";
      else
        md << " - |";
    }
    md << "\n";
  }
  md << "\n![reward curves](" << svg_name << ")\n";

  const fs::path md_path = fs::path(summary.out_dir) / "report.md";
  std::ofstream out(md_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + md_path.string());
  out << md.str();
}

}  // namespace compete
