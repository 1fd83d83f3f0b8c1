#include "ecgdx/beeswarm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ecgdx/error.hpp"
#include "ecgdx/io.hpp"
#include "ecgdx/random.hpp"

namespace ecgdx {

namespace {

constexpr double kWidth = 960.0;
constexpr double kLeft = 180.0;
constexpr double kRight = 120.0;
constexpr double kTop = 56.0;
constexpr double kRowHeight = 38.0;
constexpr double kBottom = 64.0;
constexpr double kDotRadius = 2.4;

// Low and high ends of the value scale.
constexpr int kLow[3] = {0, 139, 251};
constexpr int kHigh[3] = {255, 0, 81};

std::string fmt(const char* pattern, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, value);
  return buf;
}

std::string px(double value) { return fmt("%.2f", value); }

std::string color_for(double percentile) {
  if (std::isnan(percentile)) return "#999999";
  const double t = std::clamp(percentile, 0.0, 1.0);
  char buf[8];
  int c[3];
  for (int i = 0; i < 3; ++i) c[i] = static_cast<int>(std::lround(kLow[i] + t * (kHigh[i] - kLow[i])));
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::vector<std::array<double, kNumFeatures>> value_percentiles(const AttributionMatrix& attr) {
  const std::size_t n = attr.n_rows();
  std::vector<std::array<double, kNumFeatures>> out(n);
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    std::vector<double> present;
    for (const auto& v : attr.values) {
      if (!std::isnan(v[f])) present.push_back(v[f]);
    }
    std::sort(present.begin(), present.end());
    const auto m = static_cast<double>(present.size());
    for (std::size_t i = 0; i < n; ++i) {
      const double v = attr.values[i][f];
      if (std::isnan(v)) {
        out[i][f] = kMissing;
      } else {
        const auto at_or_below = std::upper_bound(present.begin(), present.end(), v) - present.begin();
        out[i][f] = static_cast<double>(at_or_below) / m;
      }
    }
  }
  return out;
}

std::string beeswarm_csv(const AttributionMatrix& attr) {
  if (attr.n_rows() == 0) throw Error(ErrorCode::EmptySet, "no attribution rows to export");
  const auto ranking = global_importance(attr);
  const auto pct = value_percentiles(attr);
  std::string out = "feature,row_index,feature_value,shap_value,feature_value_percentile\n";
  for (const auto& item : ranking) {
    const std::size_t f = item.feature;
    for (std::size_t i = 0; i < attr.n_rows(); ++i) {
      out += kFeatureNames[f];
      out.push_back(',');
      out += std::to_string(attr.row_index[i]);
      out.push_back(',');
      if (!std::isnan(attr.values[i][f])) out += format_double(attr.values[i][f]);
      out.push_back(',');
      out += format_double(attr.phi[i][f]);
      out.push_back(',');
      if (!std::isnan(pct[i][f])) out += format_double(pct[i][f]);
      out.push_back('\n');
    }
  }
  return out;
}

std::string beeswarm_svg(const AttributionMatrix& attr, const BeeswarmOptions& options) {
  if (attr.n_rows() == 0) throw Error(ErrorCode::EmptySet, "no attribution rows to plot");
  const auto ranking = global_importance(attr);
  const auto pct = value_percentiles(attr);

  double lo = 0.0;
  double hi = 0.0;
  for (const auto& phi : attr.phi) {
    for (const double v : phi) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi - lo <= 0.0) {
    lo = -1.0;
    hi = 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double plot_width = kWidth - kLeft - kRight;
  const double height = kTop + kRowHeight * static_cast<double>(kNumFeatures) + kBottom;
  const double axis_y = kTop + kRowHeight * static_cast<double>(kNumFeatures);
  const auto x_of = [&](double v) { return kLeft + (v - lo) / (hi - lo) * plot_width; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(kWidth) + "\" height=\"" + px(height) +
         "\" viewBox=\"0 0 " + px(kWidth) + " " + px(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<defs><linearGradient id=\"value-scale\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">";
  svg += "<stop offset=\"0\" stop-color=\"" + color_for(0.0) + "\"/>";
  svg += "<stop offset=\"1\" stop-color=\"" + color_for(1.0) + "\"/></linearGradient></defs>\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  if (!options.title.empty()) {
    svg += "<text x=\"" + px(kWidth / 2) + "\" y=\"28\" text-anchor=\"middle\" font-size=\"15\">" +
           xml_escape(options.title) + "</text>\n";
  }

  svg += "<line x1=\"" + px(x_of(0.0)) + "\" y1=\"" + px(kTop) + "\" x2=\"" + px(x_of(0.0)) + "\" y2=\"" +
         px(axis_y) + "\" stroke=\"#bbbbbb\"/>\n";

  for (std::size_t rank = 0; rank < ranking.size(); ++rank) {
    const std::size_t f = ranking[rank].feature;
    const double center = kTop + kRowHeight * (static_cast<double>(rank) + 0.5);
    svg += "<line x1=\"" + px(kLeft) + "\" y1=\"" + px(center) + "\" x2=\"" + px(kLeft + plot_width) + "\" y2=\"" +
           px(center) + "\" stroke=\"#eeeeee\" stroke-dasharray=\"2,3\"/>\n";
    svg += "<text x=\"" + px(kLeft - 10) + "\" y=\"" + px(center + 4) + "\" text-anchor=\"end\">" +
           std::string(kFeatureNames[f]) + "</text>\n";
    svg += "<g>\n";
    Rng jitter(derive_seed(options.seed, f));
    for (std::size_t i = 0; i < attr.n_rows(); ++i) {
      const double y = center + (jitter.uniform() - 0.5) * kRowHeight * 0.7;
      svg += "<circle cx=\"" + px(x_of(attr.phi[i][f])) + "\" cy=\"" + px(y) + "\" r=\"" + px(kDotRadius) +
             "\" fill=\"" + color_for(pct[i][f]) + "\" fill-opacity=\"0.8\"/>\n";
    }
    svg += "</g>\n";
  }

  svg += "<line x1=\"" + px(kLeft) + "\" y1=\"" + px(axis_y) + "\" x2=\"" + px(kLeft + plot_width) + "\" y2=\"" +
         px(axis_y) + "\" stroke=\"#333333\"/>\n";
  constexpr int kTicks = 5;
  for (int t = 0; t <= kTicks; ++t) {
    const double v = lo + (hi - lo) * t / kTicks;
    const double x = x_of(v);
    svg += "<line x1=\"" + px(x) + "\" y1=\"" + px(axis_y) + "\" x2=\"" + px(x) + "\" y2=\"" + px(axis_y + 5) +
           "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + px(x) + "\" y=\"" + px(axis_y + 18) + "\" text-anchor=\"middle\">" + fmt("%.3g", v) +
           "</text>\n";
  }
  svg += "<text x=\"" + px(kLeft + plot_width / 2) + "\" y=\"" + px(axis_y + 44) +
         "\" text-anchor=\"middle\">SHAP value (impact on model output, log-odds)</text>\n";

  const double bar_x = kLeft + plot_width + 40;
  const double bar_h = kRowHeight * static_cast<double>(kNumFeatures) * 0.8;
  const double bar_y = kTop + (kRowHeight * static_cast<double>(kNumFeatures) - bar_h) / 2;
  svg += "<rect x=\"" + px(bar_x) + "\" y=\"" + px(bar_y) + "\" width=\"10\" height=\"" + px(bar_h) +
         "\" fill=\"url(#value-scale)\"/>\n";
  svg += "<text x=\"" + px(bar_x + 16) + "\" y=\"" + px(bar_y + 10) + "\">High</text>\n";
  svg += "<text x=\"" + px(bar_x + 16) + "\" y=\"" + px(bar_y + bar_h) + "\">Low</text>\n";
  svg += "<text transform=\"translate(" + px(bar_x + 64) + "," + px(bar_y + bar_h / 2) +
         ") rotate(90)\" text-anchor=\"middle\">Feature value</text>\n";
  svg += "</svg>\n";
  return svg;
}

void beeswarm_export(const AttributionMatrix& attr, const std::filesystem::path& out_dir,
                     const BeeswarmOptions& options, const std::string& stem) {
  const std::string csv = beeswarm_csv(attr);
  const std::string svg = beeswarm_svg(attr, options);
  write_file_atomic(out_dir / (stem + ".csv"), csv);
  write_file_atomic(out_dir / (stem + ".svg"), svg);
}

}  // namespace ecgdx
