#pragma once

#include <string>
#include <vector>

#include "ccm/diagnostics.hpp"

namespace ccm {

struct FigureOutput {
  std::string svg;
  std::string csv;
};

// Suspended rootogram: expected line + credible band, observed bars hanging
// from the expected curve.
FigureOutput render_rootogram(const RootogramData& data, const std::string& title,
                              const std::string& manifest_json);
RootogramData rootogram_from_csv(const std::string& csv_text);

// Faceted interval panel (one facet per repo, one row per team).
struct ProbPanelRow {
  std::string repo;
  std::string team;
  double estimate = 0, lo = 0, hi = 0;
};
FigureOutput render_prob_panel(const std::vector<ProbPanelRow>& rows, const std::string& title,
                               const std::string& manifest_json);
std::vector<ProbPanelRow> prob_panel_from_csv(const std::string& csv_text);

// Line-with-band chart; one series per distinct `series` value. Used for
// cumulative-probability and conditional-effect figures.
struct CurvePoint {
  std::string series;
  double x = 0;
  double estimate = 0, lo = 0, hi = 0;
};
FigureOutput render_curves(const std::vector<CurvePoint>& points, const std::string& title,
                           const std::string& x_label, const std::string& y_label,
                           const std::string& manifest_json);
std::vector<CurvePoint> curves_from_csv(const std::string& csv_text);

// Histogram of a statistic across draws with the observed value marked.
struct HistogramData {
  std::vector<double> values;
  double observed = 0;
  int bins = 30;
};
FigureOutput render_histogram(const HistogramData& data, const std::string& title,
                              const std::string& x_label, const std::string& manifest_json);
HistogramData histogram_from_csv(const std::string& csv_text);

}  // namespace ccm
