#include "xids/plot.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "xids/error.hpp"
#include "xids/rng.hpp"

namespace xids {

Rgb lerp(Rgb low, Rgb high, double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto mix = [t](std::uint8_t a, std::uint8_t b) {
    return static_cast<std::uint8_t>(std::lround(a + (static_cast<double>(b) - a) * t));
  };
  return {mix(low.r, high.r), mix(low.g, high.g), mix(low.b, high.b)};
}

std::string to_hex(Rgb c) { return fmt::format("#{:02x}{:02x}{:02x}", c.r, c.g, c.b); }

void PlotSpec::validate() const {
  if (top_k < 1) throw Error(ErrorCode::kInvalidArgument, "plot top_k must be >= 1");
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "plot dimensions must be positive");
  }
}

Rgb class_color(AttackCategory c) {
  switch (c) {
    case AttackCategory::kBenign:
      return {31, 119, 180};
    case AttackCategory::kDataAlteration:
      return {255, 127, 14};
    case AttackCategory::kSpoofing:
      return {44, 160, 44};
  }
  return {};
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out.push_back(ch);
    }
  }
  return out;
}

struct Frame {
  double left = 170.0;
  double right = 40.0;
  double top = 50.0;
  double bottom = 60.0;
  double plot_w = 0.0;
  double plot_h = 0.0;

  explicit Frame(const PlotSpec& spec) {
    left = std::min(left, spec.width * 0.4);
    right = std::min(right, spec.width * 0.1);
    top = std::min(top, spec.height * 0.2);
    bottom = std::min(bottom, spec.height * 0.2);
    plot_w = std::max(1.0, spec.width - left - right);
    plot_h = std::max(1.0, spec.height - top - bottom);
  }
};

void open_document(std::string& out, const PlotSpec& spec, const Frame& fr) {
  fmt::format_to(std::back_inserter(out),
                 "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
                 "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" "
                 "height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
                 "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n"
                 "<text x=\"{2:.3f}\" y=\"{3:.3f}\" font-family=\"sans-serif\" "
                 "font-size=\"16\" text-anchor=\"middle\">{4}</text>\n",
                 spec.width, spec.height, fr.left + fr.plot_w / 2, fr.top * 0.6,
                 xml_escape(spec.title));
}

void x_axis(std::string& out, const Frame& fr, double lo, double hi, const std::string& label) {
  const double y = fr.top + fr.plot_h;
  fmt::format_to(std::back_inserter(out),
                 "<line class=\"axis\" x1=\"{:.3f}\" y1=\"{:.3f}\" x2=\"{:.3f}\" y2=\"{:.3f}\" "
                 "stroke=\"#333333\"/>\n",
                 fr.left, y, fr.left + fr.plot_w, y);
  constexpr int kTicks = 4;
  for (int t = 0; t <= kTicks; ++t) {
    const double v = lo + (hi - lo) * t / kTicks;
    const double px = fr.left + fr.plot_w * t / kTicks;
    fmt::format_to(std::back_inserter(out),
                   "<line x1=\"{0:.3f}\" y1=\"{1:.3f}\" x2=\"{0:.3f}\" y2=\"{2:.3f}\" "
                   "stroke=\"#333333\"/>\n"
                   "<text x=\"{0:.3f}\" y=\"{3:.3f}\" font-family=\"sans-serif\" "
                   "font-size=\"11\" text-anchor=\"middle\">{4:.3g}</text>\n",
                   px, y, y + 5, y + 18, v);
  }
  fmt::format_to(std::back_inserter(out),
                 "<text x=\"{:.3f}\" y=\"{:.3f}\" font-family=\"sans-serif\" font-size=\"12\" "
                 "text-anchor=\"middle\">{}</text>\n",
                 fr.left + fr.plot_w / 2, y + 40, xml_escape(label));
}

void row_label(std::string& out, const Frame& fr, double y, const std::string& name) {
  fmt::format_to(std::back_inserter(out),
                 "<text x=\"{:.3f}\" y=\"{:.3f}\" font-family=\"sans-serif\" font-size=\"12\" "
                 "text-anchor=\"end\" dominant-baseline=\"middle\">{}</text>\n",
                 fr.left - 8, y, xml_escape(name));
}

}  // namespace

std::string render_bar(const SummaryStats& summary, const PlotSpec& spec) {
  spec.validate();
  if (summary.mean_abs.rows() == 0 || summary.ranking.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot plot an empty summary");
  }
  const std::vector<std::size_t>& ranked =
      spec.category ? summary.class_ranking[code_of(*spec.category)] : summary.ranking;
  std::size_t rows = spec.top_k;
  if (rows > ranked.size()) {
    spdlog::warn("bar plot top_k {} exceeds the {} ranked features; clamping", rows,
                 ranked.size());
    rows = ranked.size();
  }

  std::vector<std::size_t> classes;
  if (spec.category) {
    classes.push_back(static_cast<std::size_t>(code_of(*spec.category)));
  } else {
    for (std::size_t c = 0; c < summary.mean_abs.cols(); ++c) classes.push_back(c);
  }
  auto bar_total = [&](std::size_t f) {
    double t = 0.0;
    for (std::size_t c : classes) t += summary.mean_abs(f, c);
    return t;
  };
  double axis_max = 0.0;
  for (std::size_t r = 0; r < rows; ++r) axis_max = std::max(axis_max, bar_total(ranked[r]));
  const double scale_max = axis_max > 0.0 ? axis_max : 1.0;

  const Frame fr(spec);
  std::string out;
  open_document(out, spec, fr);
  fmt::format_to(std::back_inserter(out),
                 "<g id=\"plot\" data-x-min=\"0\" data-x-max=\"{}\" data-px-min=\"{}\" "
                 "data-px-max=\"{}\">\n",
                 scale_max, fr.left, fr.left + fr.plot_w);
  const double row_h = fr.plot_h / static_cast<double>(rows);
  const double bar_h = row_h * 0.7;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t f = ranked[r];
    const double y = fr.top + row_h * static_cast<double>(r) + (row_h - bar_h) / 2;
    double x = fr.left;
    for (std::size_t c : classes) {
      const double len = summary.mean_abs(f, c) / scale_max * fr.plot_w;
      const auto cat = category_from_code(static_cast<int>(c));
      fmt::format_to(std::back_inserter(out),
                     "<rect class=\"bar\" data-feature=\"{}\" data-class=\"{}\" "
                     "data-value=\"{}\" x=\"{:.3f}\" y=\"{:.3f}\" width=\"{:.3f}\" "
                     "height=\"{:.3f}\" fill=\"{}\"/>\n",
                     xml_escape(summary.feature_names[f]), to_string(cat),
                     summary.mean_abs(f, c), x, y, len, bar_h, to_hex(class_color(cat)));
      x += len;
    }
    row_label(out, fr, y + bar_h / 2, summary.feature_names[f]);
  }
  out += "</g>\n";
  x_axis(out, fr, 0.0, scale_max, "mean(|Shapley value|)");
  if (!spec.category) {
    double ly = fr.top + 4;
    for (std::size_t c : classes) {
      const auto cat = category_from_code(static_cast<int>(c));
      fmt::format_to(std::back_inserter(out),
                     "<rect x=\"{0:.3f}\" y=\"{1:.3f}\" width=\"10\" height=\"10\" "
                     "fill=\"{2}\"/>\n<text x=\"{3:.3f}\" y=\"{4:.3f}\" "
                     "font-family=\"sans-serif\" font-size=\"11\">{5}</text>\n",
                     fr.left + fr.plot_w - 110, ly, to_hex(class_color(cat)),
                     fr.left + fr.plot_w - 95, ly + 9, to_string(cat));
      ly += 16;
    }
  }
  out += "</svg>\n";
  return out;
}

std::string render_beeswarm(const ShapExplanation& expl, AttackCategory category,
                            const PlotSpec& spec) {
  spec.validate();
  const auto c = static_cast<std::size_t>(code_of(category));
  if (expl.n_samples == 0 || expl.n_features == 0 || c >= expl.n_classes) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("no attributions for class {}", to_string(category)));
  }
  const SummaryStats summary = summarize(expl, spec.top_k);
  const auto& strips = summary.beeswarm[c];

  double range = 0.0;
  for (const auto& s : strips) {
    for (double a : s.attributions) range = std::max(range, std::abs(a));
  }
  if (!(range > 0.0)) range = 1.0;

  const Frame fr(spec);
  const double px_min = fr.left;
  const double px_max = fr.left + fr.plot_w;
  auto to_px = [&](double a) { return px_min + (a + range) / (2 * range) * (px_max - px_min); };

  std::string out;
  open_document(out, spec, fr);
  fmt::format_to(std::back_inserter(out),
                 "<g id=\"plot\" data-x-min=\"{}\" data-x-max=\"{}\" data-px-min=\"{}\" "
                 "data-px-max=\"{}\">\n",
                 -range, range, px_min, px_max);
  fmt::format_to(std::back_inserter(out),
                 "<line class=\"zero\" x1=\"{0}\" y1=\"{1:.3f}\" x2=\"{0}\" "
                 "y2=\"{2:.3f}\" stroke=\"#999999\"/>\n",
                 to_px(0.0), fr.top, fr.top + fr.plot_h);

  const double row_h = fr.plot_h / static_cast<double>(std::max<std::size_t>(1, strips.size()));
  constexpr double kRadius = 2.5;
  const double max_offset = std::max(0.0, row_h / 2 - kRadius);
  Rng rng(spec.jitter_seed);
  for (std::size_t r = 0; r < strips.size(); ++r) {
    const auto& strip = strips[r];
    const double cy = fr.top + row_h * (static_cast<double>(r) + 0.5);
    const auto [vmin_it, vmax_it] = std::minmax_element(strip.values.begin(), strip.values.end());
    const double vmin = *vmin_it;
    const double vspan = *vmax_it - vmin;

    // stack points that land in the same pixel column; the seeded shuffle
    // decides who sits nearest the strip center
    std::vector<std::size_t> order(strip.attributions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    std::map<long, int> column_fill;
    std::vector<double> offset(order.size(), 0.0);
    for (std::size_t i : order) {
      const long column = std::lround(to_px(strip.attributions[i]) / (2 * kRadius));
      const int k = column_fill[column]++;
      const double step = kRadius * 0.8 * static_cast<double>((k + 1) / 2);
      double off = (k % 2 == 1) ? -step : step;
      if (max_offset > 0.0) {
        off = std::fmod(off, max_offset);
      } else {
        off = 0.0;
      }
      offset[i] = off;
    }

    row_label(out, fr, cy, strip.name);
    for (std::size_t i = 0; i < strip.attributions.size(); ++i) {
      const double t = vspan > 0.0 ? (strip.values[i] - vmin) / vspan : 0.5;
      fmt::format_to(std::back_inserter(out),
                     "<circle class=\"point\" data-feature=\"{}\" cx=\"{}\" cy=\"{:.3f}\" "
                     "r=\"{}\" fill=\"{}\"/>\n",
                     xml_escape(strip.name), to_px(strip.attributions[i]), cy + offset[i],
                     kRadius, to_hex(lerp(spec.low_color, spec.high_color, t)));
    }
  }
  out += "</g>\n";
  x_axis(out, fr, -range, range,
         fmt::format("Shapley value (impact on {} margin)", to_string(category)));
  // color bar legend
  fmt::format_to(std::back_inserter(out),
                 "<defs><linearGradient id=\"ramp\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">"
                 "<stop offset=\"0\" stop-color=\"{}\"/><stop offset=\"1\" stop-color=\"{}\"/>"
                 "</linearGradient></defs>\n"
                 "<rect x=\"{:.3f}\" y=\"{:.3f}\" width=\"8\" height=\"{:.3f}\" "
                 "fill=\"url(#ramp)\"/>\n",
                 to_hex(spec.low_color), to_hex(spec.high_color), px_max + 12, fr.top,
                 fr.plot_h);
  out += "</svg>\n";
  return out;
}

}  // namespace xids
