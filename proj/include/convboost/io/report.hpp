#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "convboost/error.hpp"
#include "convboost/eval.hpp"
#include "convboost/io/files.hpp"
#include "convboost/io/metadata.hpp"
#include "convboost/io/text.hpp"
#include "convboost/io/xml.hpp"

// Evaluation reports. The CSV holds "# key=value" metadata, a
// threshold,recall block and a budget,recall block. The SVG draws the same
// curve as a polyline whose points are the CSV rows in data coordinates.
namespace convboost::io {

inline Metadata report_summary(const EvalReport& r) {
  Metadata m;
  m.set("images_evaluated", std::to_string(r.images_evaluated));
  m.set("images_blacklisted", std::to_string(r.images_blacklisted));
  m.set("ground_truths", std::to_string(r.ground_truths));
  m.set("avg_proposals_per_image", text::format_double(r.avg_proposals_per_image));
  m.set("auc", text::format_double(r.auc));
  return m;
}

inline std::string format_report_csv(const EvalReport& r, const Metadata& meta = {}) {
  std::string out = text::metadata_lines(meta) + text::metadata_lines(report_summary(r));
  out += "threshold,recall\n";
  for (std::size_t i = 0; i < r.curve.thresholds.size(); ++i)
    out += text::format_double(r.curve.thresholds[i]) + "," + text::format_double(r.curve.recall[i]) + "\n";
  out += "budget,recall\n";
  for (const auto& [b, rec] : r.recall_vs_count)
    out += std::to_string(b) + "," + text::format_double(rec) + "\n";
  return out;
}

struct ReportTables {
  Metadata meta;
  std::vector<std::pair<double, double>> curve;
  std::vector<std::pair<std::size_t, double>> budgets;
};

inline ReportTables parse_report_csv(std::string_view doc) {
  ReportTables t;
  int block = 0;
  for (const auto& [no, line] : text::lines(doc)) {
    if (text::read_metadata_line(line, t.meta) || text::trim(line).empty()) continue;
    if (line == "threshold,recall") {
      block = 1;
      continue;
    }
    if (line == "budget,recall") {
      block = 2;
      continue;
    }
    const auto f = text::split(line, ',');
    double rec = 0;
    if (block == 0 || f.size() != 2 || !text::parse_double(f[1], rec))
      text::fail("report", no, "expected a value,recall row inside a block");
    if (block == 1) {
      double th = 0;
      if (!text::parse_double(f[0], th)) text::fail("report", no, "bad threshold");
      t.curve.emplace_back(th, rec);
    } else {
      std::size_t b = 0;
      if (!text::parse_size(f[0], b)) text::fail("report", no, "bad budget");
      t.budgets.emplace_back(b, rec);
    }
  }
  return t;
}

// Standalone recall-vs-IoU plot: x in [0.5, 1], y in [0, 1].
inline std::string format_report_svg(const EvalReport& r, const Metadata& meta = {},
                                     std::string_view label = "proposals") {
  constexpr double kW = 480, kH = 360, kLeft = 60, kTop = 20, kPlotW = 400, kPlotH = 300;
  constexpr double kX0 = 0.5, kX1 = 1.0;
  const double sx = kPlotW / (kX1 - kX0), sy = kPlotH;
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
       "\" viewBox=\"0 0 " + num(kW) + " " + num(kH) + "\">\n";
  s += "<metadata>\n" + xml::escape(text::metadata_lines(meta, "")) + "</metadata>\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + num(kW) + "\" height=\"" + num(kH) + "\" fill=\"white\"/>\n";
  // Axes, grid and tick labels.
  s += "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = kX0 + 0.1 * k, px = kLeft + (xv - kX0) * sx;
    const double yv = 0.2 * k, py = kTop + kPlotH - yv * sy;
    s += "<line x1=\"" + num(px) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(px) + "\" y2=\"" +
         num(kTop + kPlotH) + "\" stroke=\"#dddddd\"/>\n";
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(py) + "\" x2=\"" + num(kLeft + kPlotW) +
         "\" y2=\"" + num(py) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + num(px) + "\" y=\"" + num(kTop + kPlotH + 15) + "\" text-anchor=\"middle\">" +
         num(xv) + "</text>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" + num(yv) +
         "</text>\n";
  }
  s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kPlotW) + "\" height=\"" +
       num(kPlotH) + "\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<text x=\"" + num(kLeft + kPlotW / 2) + "\" y=\"" + num(kH - 8) +
       "\" text-anchor=\"middle\">IoU threshold</text>\n";
  s += "<text x=\"15\" y=\"" + num(kTop + kPlotH / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " +
       num(kTop + kPlotH / 2) + ")\">recall</text>\n";
  s += "</g>\n";
  // Curve in data coordinates.
  s += "<g transform=\"matrix(" + num(sx) + " 0 0 " + num(-sy) + " " + num(kLeft - kX0 * sx) + " " +
       num(kTop + kPlotH) + ")\">\n";
  s += "<polyline id=\"recall-curve\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" "
       "vector-effect=\"non-scaling-stroke\" points=\"";
  for (std::size_t i = 0; i < r.curve.thresholds.size(); ++i) {
    if (i) s += ' ';
    s += text::format_double(r.curve.thresholds[i]) + "," + text::format_double(r.curve.recall[i]);
  }
  s += "\"/>\n</g>\n";
  char legend[128];
  std::snprintf(legend, sizeof legend, "AUC=%.3f (N=%.0f)", r.auc, r.avg_proposals_per_image);
  s += "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<line x1=\"" + num(kLeft + kPlotW - 170) + "\" y1=\"" + num(kTop + 18) + "\" x2=\"" +
       num(kLeft + kPlotW - 150) + "\" y2=\"" + num(kTop + 18) + "\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n";
  s += "<text x=\"" + num(kLeft + kPlotW - 145) + "\" y=\"" + num(kTop + 22) + "\">" + xml::escape(label) +
       " " + legend + "</text>\n";
  s += "</g>\n</svg>\n";
  return s;
}

// Vertices of the recall polyline in an SVG written by format_report_svg.
inline std::vector<std::pair<double, double>> parse_svg_polyline(std::string_view svg) {
  const auto root = xml::parse(svg);
  std::vector<std::pair<double, double>> out;
  std::vector<const xml::Element*> stack{&root};
  while (!stack.empty()) {
    const auto* e = stack.back();
    stack.pop_back();
    if (e->name == "polyline") {
      for (const auto& [k, v] : e->attributes) {
        if (k != "points") continue;
        for (auto tok : text::split(v, ' ')) {
          if (tok.empty()) continue;
          const auto xy = text::split(tok, ',');
          double x = 0, y = 0;
          if (xy.size() != 2 || !text::parse_double(xy[0], x) || !text::parse_double(xy[1], y))
            throw ParseError("malformed polyline point '" + std::string(tok) + "'");
          out.emplace_back(x, y);
        }
        return out;
      }
    }
    for (auto it = e->children.rbegin(); it != e->children.rend(); ++it) stack.push_back(&*it);
  }
  throw ParseError("SVG has no polyline");
}

}  // namespace convboost::io
