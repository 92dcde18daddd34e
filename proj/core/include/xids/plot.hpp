#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "xids/category.hpp"
#include "xids/shapley.hpp"

namespace xids {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// Linear RGB interpolation, t clamped to [0, 1].
Rgb lerp(Rgb low, Rgb high, double t);
std::string to_hex(Rgb color);

struct PlotSpec {
  std::string title;
  std::optional<AttackCategory> category;  // unset: stacked over all classes
  std::size_t top_k = 10;
  int width = 800;
  int height = 500;
  Rgb low_color{0, 0, 255};   // low feature value
  Rgb high_color{255, 0, 0};  // high feature value
  std::uint64_t jitter_seed = 0;

  void validate() const;
};

/// Class fill colors for stacked bars, in class-code order.
Rgb class_color(AttackCategory c);

/// Horizontal mean-|attribution| bar chart. One row per top-k feature,
/// segmented per class when spec.category is unset. Bar length in pixels is
/// value / axis_max * plot width, where axis_max is the largest bar total.
/// The plot area and axis scale are recorded as data-* attributes on the
/// <g id="plot"> element.
std::string render_bar(const SummaryStats& summary, const PlotSpec& spec);

/// Beeswarm strip plot for one class. x = attribution on an axis symmetric
/// about zero; color = feature value on the low->high ramp; vertical
/// offsets stack points that share a pixel column, with the stacking order
/// shuffled by spec.jitter_seed. The axis transform is emitted as
/// data-x-min/data-x-max/data-px-min/data-px-max on <g id="plot">.
std::string render_beeswarm(const ShapExplanation& expl, AttackCategory category,
                            const PlotSpec& spec);

}  // namespace xids
