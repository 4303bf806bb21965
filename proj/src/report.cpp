#include "ccm/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "ccm/csv.hpp"
#include "ccm/errors.hpp"
#include "ccm/math.hpp"

namespace ccm {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const char* kPalette[] = {"#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951",
                          "#ff8ab7", "#a463f2", "#97bbf5", "#9c6b4e", "#9498a0"};

// Minimal SVG chart surface with linear scales and margin bookkeeping.
class Svg {
 public:
  Svg(double width, double height, double x_min, double x_max, double y_min, double y_max)
      : w_(width), h_(height), x0_(x_min), x1_(x_max), y0_(y_min), y1_(y_max) {
    if (x1_ == x0_) x1_ = x0_ + 1;
    if (y1_ == y0_) y1_ = y0_ + 1;
    body_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w_) + "\" height=\"" +
             fmt(h_) + "\" viewBox=\"0 0 " + fmt(w_) + " " + fmt(h_) + "\">\n";
    body_ += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  double px(double x) const { return ml_ + (x - x0_) / (x1_ - x0_) * (w_ - ml_ - mr_); }
  double py(double y) const { return h_ - mb_ - (y - y0_) / (y1_ - y0_) * (h_ - mt_ - mb_); }

  void comment(const std::string& c) {
    if (!c.empty()) body_ += c + "\n";
  }
  void title(const std::string& t) {
    body_ += "<text x=\"" + fmt(w_ / 2) + "\" y=\"16\" text-anchor=\"middle\" font-size=\"14\" "
             "font-family=\"sans-serif\">" + t + "</text>\n";
  }
  void axes(const std::string& x_label, const std::string& y_label) {
    line(ml_, h_ - mb_, w_ - mr_, h_ - mb_, "#333", 1.0);
    line(ml_, mt_, ml_, h_ - mb_, "#333", 1.0);
    for (int i = 0; i <= 4; ++i) {
      const double xv = x0_ + (x1_ - x0_) * i / 4.0;
      const double yv = y0_ + (y1_ - y0_) * i / 4.0;
      line(px(xv), h_ - mb_, px(xv), h_ - mb_ + 4, "#333", 1.0);
      text(px(xv), h_ - mb_ + 16, fmt(xv), "middle", 10);
      line(ml_ - 4, py(yv), ml_, py(yv), "#333", 1.0);
      text(ml_ - 6, py(yv) + 3, fmt(yv), "end", 10);
    }
    text((ml_ + w_ - mr_) / 2, h_ - 4, x_label, "middle", 11);
    body_ += "<text x=\"12\" y=\"" + fmt((mt_ + h_ - mb_) / 2) +
             "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\" "
             "transform=\"rotate(-90 12 " + fmt((mt_ + h_ - mb_) / 2) + ")\">" + y_label +
             "</text>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& color, double width) {
    body_ += "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" +
             fmt(y2) + "\" stroke=\"" + color + "\" stroke-width=\"" + fmt(width) + "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill) {
    body_ += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) +
             "\" height=\"" + fmt(h) + "\" fill=\"" + fill + "\"/>\n";
  }
  void circle(double x, double y, double r, const std::string& fill) {
    body_ += "<circle cx=\"" + fmt(x) + "\" cy=\"" + fmt(y) + "\" r=\"" + fmt(r) + "\" fill=\"" +
             fill + "\"/>\n";
  }
  void text(double x, double y, const std::string& t, const std::string& anchor, int size) {
    body_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" text-anchor=\"" + anchor +
             "\" font-size=\"" + std::to_string(size) + "\" font-family=\"sans-serif\">" + t +
             "</text>\n";
  }
  void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill) {
    body_ += "<polygon points=\"";
    for (const auto& [x, y] : pts) body_ += fmt(x) + "," + fmt(y) + " ";
    body_ += "\" fill=\"" + fill + "\" fill-opacity=\"0.3\"/>\n";
  }
  void path(const std::vector<std::pair<double, double>>& pts, const std::string& color,
            double width) {
    if (pts.empty()) return;
    body_ += "<path d=\"M";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) body_ += " L";
      body_ += fmt(pts[i].first) + " " + fmt(pts[i].second);
    }
    body_ += "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + fmt(width) + "\"/>\n";
  }
  std::string finish() { return body_ + "</svg>\n"; }

  double ml_ = 56, mr_ = 120, mt_ = 28, mb_ = 40;

 private:
  double w_, h_, x0_, x1_, y0_, y1_;
  std::string body_;
};

}  // namespace

FigureOutput render_rootogram(const RootogramData& data, const std::string& title,
                              const std::string& manifest_json) {
  FigureOutput out;
  std::string csv = manifest_json.empty() ? "" : "# manifest=" + manifest_json + "\n";
  csv += "count,expected,expected_lo,expected_hi,observed,sqrt_expected,sqrt_expected_lo,"
         "sqrt_expected_hi,sqrt_observed,deviation\n";
  for (const auto& b : data.bins) {
    csv += std::to_string(b.count) + ',' + format_double(b.expected) + ',' +
           format_double(b.expected_lo) + ',' + format_double(b.expected_hi) + ',' +
           format_double(b.observed) + ',' + format_double(b.sqrt_expected) + ',' +
           format_double(b.sqrt_expected_lo) + ',' + format_double(b.sqrt_expected_hi) + ',' +
           format_double(b.sqrt_observed) + ',' + format_double(b.deviation) + '\n';
  }
  out.csv = csv;

  double y_max = 1.0, y_min = 0.0;
  for (const auto& b : data.bins) {
    y_max = std::max({y_max, b.sqrt_expected_hi, b.sqrt_expected});
    y_min = std::min(y_min, b.deviation);
  }
  const double x_max = data.bins.empty() ? 1.0 : static_cast<double>(data.bins.back().count);
  Svg svg(720, 440, -0.5, x_max + 0.5, y_min - 0.5, y_max * 1.05);
  svg.comment(manifest_json.empty() ? "" : "<!-- manifest=" + manifest_json + " -->");
  svg.title(title);
  svg.axes("count", "sqrt(frequency)");
  // credible band around the expected curve
  std::vector<std::pair<double, double>> band;
  for (const auto& b : data.bins) band.push_back({svg.px(b.count), svg.py(b.sqrt_expected_hi)});
  for (auto it = data.bins.rbegin(); it != data.bins.rend(); ++it)
    band.push_back({svg.px(it->count), svg.py(it->sqrt_expected_lo)});
  svg.polygon(band, "#97bbf5");
  // suspended bars: from expected down by sqrt(observed)
  for (const auto& b : data.bins) {
    const double top = svg.py(b.sqrt_expected);
    const double bottom = svg.py(b.deviation);
    svg.rect(svg.px(b.count - 0.35), std::min(top, bottom), svg.px(b.count + 0.35) -
             svg.px(b.count - 0.35), std::fabs(bottom - top), "#c6dbef");
  }
  std::vector<std::pair<double, double>> exp_line;
  for (const auto& b : data.bins) exp_line.push_back({svg.px(b.count), svg.py(b.sqrt_expected)});
  svg.path(exp_line, "#e4584e", 1.5);
  svg.line(svg.px(-0.5), svg.py(0), svg.px(x_max + 0.5), svg.py(0), "#666", 0.8);
  out.svg = svg.finish();
  return out;
}

RootogramData rootogram_from_csv(const std::string& csv_text) {
  std::istringstream in(csv_text);
  CsvFile csv = read_csv(in);
  RootogramData data;
  for (const auto& row : csv.rows) {
    if (row.size() != 10) throw ValidationError("rootogram CSV: bad field count");
    RootogramBin b;
    b.count = std::stol(row[0]);
    b.expected = std::strtod(row[1].c_str(), nullptr);
    b.expected_lo = std::strtod(row[2].c_str(), nullptr);
    b.expected_hi = std::strtod(row[3].c_str(), nullptr);
    b.observed = std::strtod(row[4].c_str(), nullptr);
    b.sqrt_expected = std::strtod(row[5].c_str(), nullptr);
    b.sqrt_expected_lo = std::strtod(row[6].c_str(), nullptr);
    b.sqrt_expected_hi = std::strtod(row[7].c_str(), nullptr);
    b.sqrt_observed = std::strtod(row[8].c_str(), nullptr);
    b.deviation = std::strtod(row[9].c_str(), nullptr);
    data.bins.push_back(b);
  }
  return data;
}

FigureOutput render_prob_panel(const std::vector<ProbPanelRow>& rows, const std::string& title,
                               const std::string& manifest_json) {
  if (rows.empty()) throw ValidationError("nothing to plot: empty team/repo selection");
  FigureOutput out;
  std::string csv = manifest_json.empty() ? "" : "# manifest=" + manifest_json + "\n";
  csv += "repo,team,estimate,lo,hi\n";
  for (const auto& r : rows)
    csv += join_csv({r.repo, r.team, format_double(r.estimate), format_double(r.lo),
                     format_double(r.hi)}) + "\n";
  out.csv = csv;

  std::vector<std::string> repos, teams;
  for (const auto& r : rows) {
    if (std::find(repos.begin(), repos.end(), r.repo) == repos.end()) repos.push_back(r.repo);
    if (std::find(teams.begin(), teams.end(), r.team) == teams.end()) teams.push_back(r.team);
  }
  const double facet_h = 24.0 * static_cast<double>(teams.size()) + 34.0;
  const double height = 40.0 + facet_h * static_cast<double>(repos.size()) + 30.0;
  Svg svg(720, height, 0, 1, 0, 1);
  svg.comment(manifest_json.empty() ? "" : "<!-- manifest=" + manifest_json + " -->");
  svg.title(title);
  const double plot_l = 140, plot_r = 690;
  auto px = [&](double v) { return plot_l + v * (plot_r - plot_l); };
  double y = 46;
  for (const auto& repo : repos) {
    svg.text(plot_l - 6, y, repo, "end", 12);
    for (int i = 0; i <= 4; ++i) {
      const double v = i / 4.0;
      svg.line(px(v), y + 4, px(v), y + 8 + 24.0 * teams.size(), "#ddd", 0.6);
      if (repo == repos.back()) svg.text(px(v), height - 14, fmt(v), "middle", 10);
    }
    double ty = y + 20;
    for (const auto& team : teams) {
      auto it = std::find_if(rows.begin(), rows.end(), [&](const ProbPanelRow& r) {
        return r.repo == repo && r.team == team;
      });
      svg.text(plot_l - 6, ty + 3, team, "end", 10);
      if (it != rows.end()) {
        const std::size_t color_idx =
            static_cast<std::size_t>(std::find(teams.begin(), teams.end(), team) -
                                     teams.begin()) %
            (sizeof(kPalette) / sizeof(kPalette[0]));
        svg.line(px(it->lo), ty, px(it->hi), ty, kPalette[color_idx], 2.0);
        svg.circle(px(it->estimate), ty, 3.5, kPalette[color_idx]);
      }
      ty += 24;
    }
    y += facet_h;
  }
  svg.text((plot_l + plot_r) / 2, height - 2, "probability", "middle", 11);
  out.svg = svg.finish();
  return out;
}

std::vector<ProbPanelRow> prob_panel_from_csv(const std::string& csv_text) {
  std::istringstream in(csv_text);
  CsvFile csv = read_csv(in);
  std::vector<ProbPanelRow> rows;
  for (const auto& row : csv.rows) {
    if (row.size() != 5) throw ValidationError("prob panel CSV: bad field count");
    rows.push_back({row[0], row[1], std::strtod(row[2].c_str(), nullptr),
                    std::strtod(row[3].c_str(), nullptr), std::strtod(row[4].c_str(), nullptr)});
  }
  return rows;
}

FigureOutput render_curves(const std::vector<CurvePoint>& points, const std::string& title,
                           const std::string& x_label, const std::string& y_label,
                           const std::string& manifest_json) {
  if (points.empty()) throw ValidationError("nothing to plot: empty curve data");
  FigureOutput out;
  std::string csv = manifest_json.empty() ? "" : "# manifest=" + manifest_json + "\n";
  csv += "series,x,estimate,lo,hi\n";
  for (const auto& p : points)
    csv += join_csv({p.series, format_double(p.x), format_double(p.estimate),
                     format_double(p.lo), format_double(p.hi)}) + "\n";
  out.csv = csv;

  double x_min = points[0].x, x_max = points[0].x, y_min = 0, y_max = points[0].hi;
  for (const auto& p : points) {
    x_min = std::min(x_min, p.x);
    x_max = std::max(x_max, p.x);
    y_min = std::min(y_min, p.lo);
    y_max = std::max(y_max, p.hi);
  }
  Svg svg(720, 440, x_min, x_max, y_min, y_max * 1.05 + 1e-9);
  svg.comment(manifest_json.empty() ? "" : "<!-- manifest=" + manifest_json + " -->");
  svg.title(title);
  svg.axes(x_label, y_label);

  std::vector<std::string> series;
  for (const auto& p : points)
    if (std::find(series.begin(), series.end(), p.series) == series.end())
      series.push_back(p.series);
  double legend_y = 40;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::string color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::vector<std::pair<double, double>> line, band;
    std::vector<const CurvePoint*> pts;
    for (const auto& p : points)
      if (p.series == series[s]) pts.push_back(&p);
    for (const auto* p : pts) band.push_back({svg.px(p->x), svg.py(p->hi)});
    for (auto it = pts.rbegin(); it != pts.rend(); ++it)
      band.push_back({svg.px((*it)->x), svg.py((*it)->lo)});
    svg.polygon(band, color);
    for (const auto* p : pts) line.push_back({svg.px(p->x), svg.py(p->estimate)});
    svg.path(line, color, 1.8);
    svg.line(608, legend_y, 628, legend_y, color, 2.5);
    svg.text(632, legend_y + 3, series[s], "start", 10);
    legend_y += 16;
  }
  out.svg = svg.finish();
  return out;
}

std::vector<CurvePoint> curves_from_csv(const std::string& csv_text) {
  std::istringstream in(csv_text);
  CsvFile csv = read_csv(in);
  std::vector<CurvePoint> points;
  for (const auto& row : csv.rows) {
    if (row.size() != 5) throw ValidationError("curve CSV: bad field count");
    points.push_back({row[0], std::strtod(row[1].c_str(), nullptr),
                      std::strtod(row[2].c_str(), nullptr), std::strtod(row[3].c_str(), nullptr),
                      std::strtod(row[4].c_str(), nullptr)});
  }
  return points;
}

FigureOutput render_histogram(const HistogramData& data, const std::string& title,
                              const std::string& x_label, const std::string& manifest_json) {
  if (data.values.empty()) throw ValidationError("nothing to plot: empty histogram data");
  FigureOutput out;
  std::string csv = manifest_json.empty() ? "" : "# manifest=" + manifest_json + "\n";
  csv += "kind,value\n";
  for (double v : data.values) csv += "draw," + format_double(v) + "\n";
  csv += "observed," + format_double(data.observed) + "\n";
  out.csv = csv;

  double v_min = data.observed, v_max = data.observed;
  for (double v : data.values) {
    v_min = std::min(v_min, v);
    v_max = std::max(v_max, v);
  }
  if (v_max == v_min) v_max = v_min + 1e-9;
  const double pad = (v_max - v_min) * 0.05;
  v_min -= pad;
  v_max += pad;
  std::vector<double> freq(static_cast<std::size_t>(data.bins), 0.0);
  for (double v : data.values) {
    auto b = static_cast<std::size_t>((v - v_min) / (v_max - v_min) * data.bins);
    if (b >= freq.size()) b = freq.size() - 1;
    freq[b] += 1.0;
  }
  const double f_max = *std::max_element(freq.begin(), freq.end());
  Svg svg(720, 440, v_min, v_max, 0, f_max * 1.05);
  svg.comment(manifest_json.empty() ? "" : "<!-- manifest=" + manifest_json + " -->");
  svg.title(title);
  svg.axes(x_label, "draws");
  const double bw = (v_max - v_min) / data.bins;
  for (std::size_t b = 0; b < freq.size(); ++b) {
    const double x0 = v_min + b * bw;
    svg.rect(svg.px(x0), svg.py(freq[b]), svg.px(x0 + bw) - svg.px(x0),
             svg.py(0) - svg.py(freq[b]), "#97bbf5");
  }
  svg.line(svg.px(data.observed), svg.py(0), svg.px(data.observed), svg.py(f_max), "#222", 2.0);
  svg.text(svg.px(data.observed), svg.py(f_max) - 4, "observed", "middle", 10);
  out.svg = svg.finish();
  return out;
}

HistogramData histogram_from_csv(const std::string& csv_text) {
  std::istringstream in(csv_text);
  CsvFile csv = read_csv(in);
  HistogramData data;
  for (const auto& row : csv.rows) {
    if (row.size() != 2) throw ValidationError("histogram CSV: bad field count");
    if (row[0] == "draw") data.values.push_back(std::strtod(row[1].c_str(), nullptr));
    else data.observed = std::strtod(row[1].c_str(), nullptr);
  }
  return data;
}

}  // namespace ccm
