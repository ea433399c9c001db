#include "mir3/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "mir3/errors.hpp"
#include "mir3/format.hpp"

namespace mir3 {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 440;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 30;
constexpr int kMarginBottom = 60;

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                               "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Axis {
  double lo = 0.0, hi = 1.0;
  double px0 = 0.0, px1 = 1.0;

  double map(double v) const { return px0 + (v - lo) / (hi - lo) * (px1 - px0); }
};

void pad_range(double& lo, double& hi) {
  if (lo == hi) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;
}

class Svg {
 public:
  Svg() {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
         << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& color,
            double width = 1.0) {
    out_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2
         << "\" stroke=\"" << color << "\" stroke-width=\"" << width << "\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color) {
    out_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (const auto& [x, y] : pts) out_ << x << "," << y << " ";
    out_ << "\"/>\n";
  }

  void circle(double x, double y, double r, const std::string& color) {
    out_ << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"" << r << "\" fill=\"" << color
         << "\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& color) {
    out_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
         << "\" fill=\"" << color << "\" fill-opacity=\"0.8\"/>\n";
  }

  void star(double x, double y, double r, const std::string& color) {
    out_ << "<path fill=\"" << color << "\" d=\"M";
    for (int k = 0; k < 10; ++k) {
      const double radius = (k % 2 == 0) ? r : 0.4 * r;
      const double angle = -M_PI / 2 + k * M_PI / 5;
      out_ << (k ? "L" : "") << x + radius * std::cos(angle) << " " << y + radius * std::sin(angle);
    }
    out_ << "Z\"/>\n";
  }

  void text(double x, double y, const std::string& s, int size = 12,
            const std::string& anchor = "middle", const std::string& color = "#333") {
    out_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size
         << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\" fill=\"" << color
         << "\">" << s << "</text>\n";
  }

  void axes(const Axis& x, const Axis& y, const std::string& xlabel, const std::string& ylabel) {
    line(x.px0, y.px0, x.px1, y.px0, "#333");
    line(x.px0, y.px0, x.px0, y.px1, "#333");
    for (int k = 0; k <= 4; ++k) {
      const double v = y.lo + (y.hi - y.lo) * k / 4.0;
      const double py = y.map(v);
      line(x.px0 - 4, py, x.px0, py, "#333");
      std::ostringstream label;
      label.precision(3);
      label << v;
      text(x.px0 - 8, py + 4, label.str(), 11, "end");
    }
    text((x.px0 + x.px1) / 2, kHeight - 12, xlabel);
    out_ << "<text x=\"16\" y=\"" << (y.px0 + y.px1) / 2
         << "\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"middle\" fill=\"#333\""
         << " transform=\"rotate(-90 16 " << (y.px0 + y.px1) / 2 << ")\">" << ylabel
         << "</text>\n";
  }

  void save(const std::filesystem::path& path) {
    out_ << "</svg>\n";
    std::ofstream file(path, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write SVG '" + path.string() + "'");
    file << out_.str();
  }

 private:
  std::ostringstream out_;
};

double cell_number(const CsvTable& table, std::size_t row, int col, const char* what) {
  const std::string& s = table.rows[row][static_cast<std::size_t>(col)];
  try {
    return std::stod(s);
  } catch (...) {
    throw ConfigError(std::string("plot: non-numeric ") + what + " value '" + s + "'");
  }
}

int require_column(const CsvTable& table, const std::string& name, const std::string& file) {
  const int col = table.column(name);
  if (col < 0) throw ConfigError("plot: CSV '" + file + "' is missing column '" + name + "'");
  return col;
}

}  // namespace

void plot_ablation(const std::filesystem::path& csv, const std::filesystem::path& svg) {
  const CsvTable table = read_csv(csv);
  if (table.rows.empty()) throw ConfigError("plot: CSV '" + csv.string() + "' has no data rows");
  const int c_lambda = require_column(table, "lambda", csv.string());
  const int c_coop = require_column(table, "cooperative_mean", csv.string());
  const int c_coop_ci = require_column(table, "cooperative_ci95", csv.string());
  const int c_atk = require_column(table, "attacked_mean", csv.string());
  const int c_atk_ci = require_column(table, "attacked_ci95", csv.string());

  struct Row {
    double lambda, coop, coop_ci, atk, atk_ci;
  };
  std::vector<Row> rows;
  double min_positive = 1.0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    Row row{cell_number(table, r, c_lambda, "lambda"), cell_number(table, r, c_coop, "mean"),
            cell_number(table, r, c_coop_ci, "ci"), cell_number(table, r, c_atk, "mean"),
            cell_number(table, r, c_atk_ci, "ci")};
    if (row.lambda > 0.0) min_positive = std::min(min_positive, row.lambda);
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.lambda < b.lambda; });

  // lambda = 0 sits one decade left of the smallest positive value.
  const double zero_slot = std::log10(min_positive) - 1.0;
  auto xval = [&](double lambda) { return lambda > 0.0 ? std::log10(lambda) : zero_slot; };

  double xlo = xval(rows.front().lambda), xhi = xval(rows.back().lambda);
  double ylo = rows.front().coop, yhi = ylo;
  for (const auto& r : rows) {
    ylo = std::min({ylo, r.coop - r.coop_ci, r.atk - r.atk_ci});
    yhi = std::max({yhi, r.coop + r.coop_ci, r.atk + r.atk_ci});
  }
  pad_range(xlo, xhi);
  pad_range(ylo, yhi);

  Svg out;
  Axis x{xlo, xhi, kMarginLeft, kWidth - kMarginRight};
  Axis y{ylo, yhi, kHeight - kMarginBottom, kMarginTop};
  out.axes(x, y, "log10(lambda)", "mean episode return");

  const char* names[2] = {"cooperative", "attacked"};
  for (int series = 0; series < 2; ++series) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) {
      const double px = x.map(xval(r.lambda));
      const double mean = series == 0 ? r.coop : r.atk;
      const double ci = series == 0 ? r.coop_ci : r.atk_ci;
      pts.emplace_back(px, y.map(mean));
      out.line(px, y.map(mean - ci), px, y.map(mean + ci), kSeriesColors[series], 1.2);
      out.circle(px, y.map(mean), 2.6, kSeriesColors[series]);
    }
    out.polyline(pts, kSeriesColors[series]);
    out.text(kWidth - kMarginRight - 6, kMarginTop + 16 * (series + 1), names[series], 12, "end",
             kSeriesColors[series]);
  }
  for (const auto& r : rows) {
    std::ostringstream label;
    label << r.lambda;
    out.text(x.map(xval(r.lambda)), kHeight - kMarginBottom + 16, label.str(), 10);
  }
  out.save(svg);
}

void plot_eval_bars(const std::vector<std::filesystem::path>& csvs,
                    const std::filesystem::path& svg) {
  struct Bar {
    std::string label;
    double mean, ci;
  };
  std::vector<Bar> bars;
  for (const auto& csv : csvs) {
    const CsvTable table = read_csv(csv);
    const int c_scenario = require_column(table, "scenario", csv.string());
    const int c_seed = require_column(table, "defender_seed", csv.string());
    const int c_mean = require_column(table, "mean_return", csv.string());
    const int c_ci = require_column(table, "ci95", csv.string());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      if (table.rows[r][static_cast<std::size_t>(c_seed)] != "aggregate") continue;
      bars.push_back({csv.stem().string() + ":" + table.rows[r][static_cast<std::size_t>(c_scenario)],
                      cell_number(table, r, c_mean, "mean"), cell_number(table, r, c_ci, "ci")});
    }
  }
  if (bars.empty()) throw ConfigError("plot: no aggregate rows found in the given eval CSVs");

  double ylo = 0.0, yhi = 0.0;
  for (const auto& b : bars) {
    ylo = std::min(ylo, b.mean - b.ci);
    yhi = std::max(yhi, b.mean + b.ci);
  }
  pad_range(ylo, yhi);

  Svg out;
  Axis x{0.0, static_cast<double>(bars.size()), kMarginLeft, kWidth - kMarginRight};
  Axis y{ylo, yhi, kHeight - kMarginBottom, kMarginTop};
  out.axes(x, y, "", "mean episode return");
  const double zero_py = y.map(0.0);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    const double cx = x.map(static_cast<double>(i) + 0.5);
    const double half = 0.32 * (x.map(1.0) - x.map(0.0));
    const double top = y.map(std::max(0.0, b.mean));
    const double bottom = y.map(std::min(0.0, b.mean));
    out.rect(cx - half, top, 2 * half, std::max(1.0, bottom - top),
             kSeriesColors[i % 8]);
    out.line(cx, y.map(b.mean - b.ci), cx, y.map(b.mean + b.ci), "#333", 1.4);
    out.text(cx, kHeight - kMarginBottom + 16, b.label, 10);
  }
  out.line(kMarginLeft, zero_py, kWidth - kMarginRight, zero_py, "#999", 0.8);
  out.save(svg);
}

void plot_trajectory(const std::filesystem::path& csv, const std::filesystem::path& svg) {
  const CsvTable table = read_csv(csv);
  if (table.rows.empty()) throw ConfigError("plot: CSV '" + csv.string() + "' has no data rows");
  const int c_step = require_column(table, "step", csv.string());
  const int c_agent = require_column(table, "agent", csv.string());
  const int c_x = require_column(table, "x", csv.string());
  const int c_y = require_column(table, "y", csv.string());

  struct Point {
    int step;
    double x, y;
  };
  std::map<int, std::vector<Point>> paths;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const int agent = static_cast<int>(cell_number(table, r, c_agent, "agent"));
    paths[agent].push_back({static_cast<int>(cell_number(table, r, c_step, "step")),
                            cell_number(table, r, c_x, "x"), cell_number(table, r, c_y, "y")});
  }

  Svg out;
  const double side = std::min(kWidth - kMarginLeft - kMarginRight,
                               kHeight - kMarginTop - kMarginBottom);
  Axis x{-1.05, 1.05, kMarginLeft, kMarginLeft + side};
  Axis y{-1.05, 1.05, kMarginTop + side, kMarginTop};
  // Arena box.
  out.line(x.map(-1), y.map(-1), x.map(1), y.map(-1), "#333");
  out.line(x.map(1), y.map(-1), x.map(1), y.map(1), "#333");
  out.line(x.map(1), y.map(1), x.map(-1), y.map(1), "#333");
  out.line(x.map(-1), y.map(1), x.map(-1), y.map(-1), "#333");

  int idx = 0;
  for (auto& [agent, pts] : paths) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.step < b.step; });
    std::vector<std::pair<double, double>> line;
    for (const auto& p : pts) line.emplace_back(x.map(p.x), y.map(p.y));
    const std::string color = kSeriesColors[idx % 8];
    out.polyline(line, color);
    out.circle(line.front().first, line.front().second, 3.0, color);
    out.star(line.back().first, line.back().second, 7.0, color);
    ++idx;
  }
  out.save(svg);
}

}  // namespace mir3
