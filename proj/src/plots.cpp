#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "bowtie/error.hpp"
#include "bowtie/io.hpp"
#include "bowtie/pipeline.hpp"

namespace bowtie {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 64, kRight = 20, kTop = 24, kBottom = 48;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v, int places = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", places, v);
  return buf;
}

std::string tick_label(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  return out;
}

void svg_header(std::ofstream& out, const EvaluationReport& report) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<!-- config=" << report.config_hash << " seed=" << report.seed
      << " -->\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
}

// x axis bottom, y axis left, five x ticks; y ticks only for value scales
void axes(std::ofstream& out, double x_max, double y_max, const std::string& x_label,
          const std::string& y_label, bool y_ticks = true) {
  const double x0 = kLeft, x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom, y1 = kTop;
  out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1)
      << "\" y2=\"" << num(y0) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0)
      << "\" y2=\"" << num(y1) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double fx = x0 + (x1 - x0) * k / 5.0;
    const double vx = x_max * k / 5.0;
    out << "<line x1=\"" << num(fx) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(fx)
        << "\" y2=\"" << num(y0 + 5) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << num(fx) << "\" y=\"" << num(y0 + 18)
        << "\" text-anchor=\"middle\">" << tick_label(vx) << "</text>\n";
    if (!y_ticks) continue;
    const double fy = y0 - (y0 - y1) * k / 5.0;
    const double vy = y_max * k / 5.0;
    out << "<line x1=\"" << num(x0 - 5) << "\" y1=\"" << num(fy) << "\" x2=\""
        << num(x0) << "\" y2=\"" << num(fy) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << num(x0 - 8) << "\" y=\"" << num(fy + 4)
        << "\" text-anchor=\"end\">" << tick_label(vy) << "</text>\n";
  }
  out << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 10)
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  if (!y_label.empty())
    out << "<text x=\"16\" y=\"" << num((y0 + y1) / 2)
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << num((y0 + y1) / 2) << ")\">" << y_label << "</text>\n";
}

void accuracy_plot(const EvaluationReport& report, const std::string& dir) {
  double x_max = 0;
  for (const auto& ev : report.models)
    if (!ev.thresholds.empty()) x_max = std::max(x_max, ev.thresholds.back());
  if (x_max <= 0) x_max = 1;

  auto out = open_out(dir + "/accuracy.svg");
  svg_header(out, report);
  axes(out, x_max, 1.0, "absolute residual threshold", "fraction within threshold");
  const double x0 = kLeft, x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom, y1 = kTop;
  std::size_t idx = 0;
  for (const auto& ev : report.models) {
    const char* color = kPalette[idx % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < ev.thresholds.size(); ++k) {
      const double fx = x0 + (x1 - x0) * (ev.thresholds[k] / x_max);
      const double fy = y0 - (y0 - y1) * ev.fraction_within[k];
      out << num(fx) << "," << num(fy) << " ";
    }
    out << "\"/>\n";
    const double ly = kTop + 16 * static_cast<double>(idx + 1);
    out << "<line x1=\"" << num(x1 - 150) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
        << num(x1 - 130) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";
    out << "<text x=\"" << num(x1 - 124) << "\" y=\"" << num(ly) << "\">"
        << learner_name(ev.learner) << "</text>\n";
    ++idx;
  }
  out << "</svg>\n";

  auto csv = open_out(dir + "/accuracy.csv");
  csv << "# config=" << report.config_hash << " seed=" << report.seed << "\n";
  csv << "learner,threshold,fraction_within\n";
  for (const auto& ev : report.models)
    for (std::size_t k = 0; k < ev.thresholds.size(); ++k)
      csv << learner_name(ev.learner) << "," << format_double(ev.thresholds[k])
          << "," << format_double(ev.fraction_within[k]) << "\n";
}

void importance_plot(const EvaluationReport& report, const ModelEvaluation& ev,
                     const std::string& dir) {
  const std::string base = dir + "/importance_" + learner_name(ev.learner);
  const std::size_t p = ev.importance.size();
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ev.importance[a] > ev.importance[b];
  });
  double x_max = ev.null_importance;
  for (double v : ev.importance) x_max = std::max(x_max, v);
  x_max *= 1.1;

  auto out = open_out(base + ".svg");
  svg_header(out, report);
  axes(out, x_max, 1.0, "normalized importance", "", false);
  const double x0 = kLeft, x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom, y1 = kTop;
  const double band = (y0 - y1) / static_cast<double>(p);
  const double bar = band * 0.7;
  for (std::size_t k = 0; k < p; ++k) {
    const std::size_t f = order[k];
    const double top = y1 + band * static_cast<double>(k) + (band - bar) / 2;
    const double w = (x1 - x0) * (ev.importance[f] / x_max);
    out << "<rect x=\"" << num(x0) << "\" y=\"" << num(top) << "\" width=\""
        << num(w) << "\" height=\"" << num(bar) << "\" fill=\"" << kPalette[0]
        << "\"/>\n";
    out << "<text x=\"" << num(x0 - 8) << "\" y=\"" << num(top + bar / 2 + 4)
        << "\" text-anchor=\"end\">" << ev.schema[f] << "</text>\n";
  }
  const double null_x = x0 + (x1 - x0) * (ev.null_importance / x_max);
  out << "<line x1=\"" << num(null_x) << "\" y1=\"" << num(y0) << "\" x2=\""
      << num(null_x) << "\" y2=\"" << num(y1)
      << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
  out << "<text x=\"" << num(null_x + 4) << "\" y=\"" << num(y1 + 12)
      << "\">equal-information line</text>\n";
  out << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kTop - 8)
      << "\" text-anchor=\"middle\">" << learner_name(ev.learner)
      << (ev.importance_from_trees ? " impurity importance"
                                   : " |standardized coefficient| share")
      << "</text>\n";
  out << "</svg>\n";

  auto csv = open_out(base + ".csv");
  csv << "# config=" << report.config_hash << " seed=" << report.seed << "\n";
  csv << "feature,importance,null_importance\n";
  for (std::size_t f = 0; f < p; ++f)
    csv << ev.schema[f] << "," << format_double(ev.importance[f]) << ","
        << format_double(ev.null_importance) << "\n";
}

} // namespace

void emit_plots(const EvaluationReport& report, const std::string& dir) {
  if (report.models.empty()) return;
  accuracy_plot(report, dir);
  for (const auto& ev : report.models) importance_plot(report, ev, dir);
}

} // namespace bowtie
