// Copyright 2026 The lipscert Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "report/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "model/config.hpp"

namespace lipscert {

namespace {

constexpr const char* kHeader = "step,loss,max_act,grad_norm,nan_flag";

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_field(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') {
    throw ConfigError("metrics CSV line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::size_t parse_step(const std::string& s, std::size_t line) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("metrics CSV line " + std::to_string(line) + ": bad step '" + s + "'");
  }
  return std::stoull(s);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Panel {
  const char* title;
  double top;
  double (*get)(const StepMetrics&);
};

constexpr double kWidth = 720, kHeight = 540;
constexpr double kLeft = 80, kRight = 700, kPanelHeight = 200;

void draw_panel(std::ostringstream& svg, const Panel& panel, const std::vector<StepMetrics>& rows,
                double step_lo, double step_hi) {
  auto bad = [&](const StepMetrics& r) { return r.nan_flag || !std::isfinite(panel.get(r)); };
  double lo = INFINITY, hi = -INFINITY;
  for (const StepMetrics& r : rows) {
    if (bad(r)) continue;
    lo = std::min(lo, panel.get(r));
    hi = std::max(hi, panel.get(r));
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi == lo) lo -= 0.5, hi += 0.5;
  const double bottom = panel.top + kPanelHeight;
  auto px = [&](double step) { return kLeft + (step - step_lo) / (step_hi - step_lo) * (kRight - kLeft); };
  auto py = [&](double v) { return bottom - (v - lo) / (hi - lo) * kPanelHeight; };

  svg << "<text x=\"" << fmt("%.2f", kLeft) << "\" y=\"" << fmt("%.2f", panel.top - 8)
      << "\" font-size=\"14\">" << panel.title << "</text>\n";
  svg << "<rect x=\"" << fmt("%.2f", kLeft) << "\" y=\"" << fmt("%.2f", panel.top) << "\" width=\""
      << fmt("%.2f", kRight - kLeft) << "\" height=\"" << fmt("%.2f", kPanelHeight)
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
  svg << "<text x=\"" << fmt("%.2f", kLeft - 6) << "\" y=\"" << fmt("%.2f", panel.top + 10)
      << "\" font-size=\"11\" text-anchor=\"end\">" << fmt("%.4g", hi) << "</text>\n";
  svg << "<text x=\"" << fmt("%.2f", kLeft - 6) << "\" y=\"" << fmt("%.2f", bottom)
      << "\" font-size=\"11\" text-anchor=\"end\">" << fmt("%.4g", lo) << "</text>\n";
  svg << "<text x=\"" << fmt("%.2f", kLeft) << "\" y=\"" << fmt("%.2f", bottom + 14)
      << "\" font-size=\"11\">" << fmt("%.0f", step_lo) << "</text>\n";
  svg << "<text x=\"" << fmt("%.2f", kRight) << "\" y=\"" << fmt("%.2f", bottom + 14)
      << "\" font-size=\"11\" text-anchor=\"end\">" << fmt("%.0f", step_hi) << "</text>\n";

  std::string points;
  auto flush = [&] {
    if (points.empty()) return;
    svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"" << points
        << "\"/>\n";
    points.clear();
  };
  for (const StepMetrics& r : rows) {
    const double x = px(static_cast<double>(r.step));
    if (bad(r)) {
      flush();
      const double y = panel.top;
      svg << "<path d=\"M" << fmt("%.2f", x - 4) << ' ' << fmt("%.2f", y - 4) << " L"
          << fmt("%.2f", x + 4) << ' ' << fmt("%.2f", y + 4) << " M" << fmt("%.2f", x - 4) << ' '
          << fmt("%.2f", y + 4) << " L" << fmt("%.2f", x + 4) << ' ' << fmt("%.2f", y - 4)
          << "\" stroke=\"#d62728\" stroke-width=\"1.5\" class=\"nan\"/>\n";
      continue;
    }
    if (!points.empty()) points += ' ';
    points += fmt("%.2f", x) + ',' + fmt("%.2f", py(panel.get(r)));
  }
  flush();
}

}  // namespace

std::vector<StepMetrics> parse_metrics_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("metrics CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw ConfigError("metrics CSV header must be '" + std::string(kHeader) + "'");
  std::vector<StepMetrics> rows;
  std::size_t n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 5) {
      throw ConfigError("metrics CSV line " + std::to_string(n) + ": expected 5 fields");
    }
    StepMetrics s;
    s.step = parse_step(f[0], n);
    s.loss = parse_field(f[1], n);
    s.max_act = parse_field(f[2], n);
    s.grad_norm = parse_field(f[3], n);
    if (f[4] != "0" && f[4] != "1") {
      throw ConfigError("metrics CSV line " + std::to_string(n) + ": nan_flag must be 0 or 1");
    }
    s.nan_flag = f[4] == "1";
    rows.push_back(s);
  }
  if (rows.empty()) throw ConfigError("metrics CSV has no data rows");
  return rows;
}

std::string render_metrics_svg(const std::vector<StepMetrics>& rows) {
  if (rows.empty()) throw ConfigError("no metrics to plot");
  double step_lo = INFINITY, step_hi = -INFINITY;
  for (const StepMetrics& r : rows) {
    step_lo = std::min(step_lo, static_cast<double>(r.step));
    step_hi = std::max(step_hi, static_cast<double>(r.step));
  }
  if (step_hi == step_lo) step_hi = step_lo + 1.0;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", kWidth)
      << "\" height=\"" << fmt("%.0f", kHeight) << "\" viewBox=\"0 0 " << fmt("%.0f", kWidth) << ' '
      << fmt("%.0f", kHeight) << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  draw_panel(svg, {"loss", 40, [](const StepMetrics& r) { return r.loss; }}, rows, step_lo, step_hi);
  draw_panel(svg, {"max activation norm", 300, [](const StepMetrics& r) { return r.max_act; }}, rows,
             step_lo, step_hi);
  svg << "<text x=\"" << fmt("%.2f", (kLeft + kRight) / 2) << "\" y=\"" << fmt("%.2f", kHeight - 10)
      << "\" font-size=\"12\" text-anchor=\"middle\">step</text>\n</svg>\n";
  return svg.str();
}

}  // namespace lipscert
