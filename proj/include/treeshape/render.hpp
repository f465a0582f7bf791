#pragma once

// SVG drawings of trees, panel strips (geodesics, mode sweeps, samples) and
// dendrograms. Laterals sharing a correspondence label share a color.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "treeshape/clustering.hpp"
#include "treeshape/error.hpp"
#include "treeshape/tree_model.hpp"

namespace treeshape {

struct RenderStyle {
  double stroke_width = 1.5;
  std::string main_color = "#303030";
  std::vector<std::string> palette{"#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4",
                                   "#f032e6", "#9a6324", "#469990", "#800000", "#808000", "#000075",
                                   "#bfef45", "#fabed4", "#dcbeff", "#aaffc3", "#ffd8b1", "#a9a9a9"};
  double panel_width = 240.0;
  double panel_height = 320.0;
  double margin = 16.0;

  void validate() const {
    if (!(stroke_width > 0.0 && panel_width > 0.0 && panel_height > 0.0 && margin >= 0.0))
      throw ValidationError("render style dimensions must be positive");
    if (palette.empty()) throw ValidationError("render style palette is empty");
  }
  const std::string& color(std::size_t label) const { return palette[label % palette.size()]; }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Box {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  void add(const Point2& p) {
    x0 = std::min(x0, p.x());
    y0 = std::min(y0, p.y());
    x1 = std::max(x1, p.x());
    y1 = std::max(y1, p.y());
  }
  double w() const { return std::max(x1 - x0, 1e-12); }
  double h() const { return std::max(y1 - y0, 1e-12); }
};

inline Box bounds(const RootTree& t) {
  Box b;
  for (const auto& p : t.main.points) b.add(p);
  for (const auto& l : t.laterals)
    if (!l.branch.is_virtual)
      for (const auto& p : l.branch.points) b.add(p);
  return b;
}

inline std::string svg_header(double w, double h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) +
         "\" height=\"" + fmt(h) + "\" viewBox=\"0 0 " + fmt(w) + " " + fmt(h) + "\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

/// Polylines of one tree in a panel at (ox, oy). y grows upward in tree space.
inline void draw_tree(std::ostringstream& out, const RootTree& t, const std::vector<std::size_t>* labels,
                      const RenderStyle& style, double ox, double oy, double scale) {
  const Box b = bounds(t);
  const double cx = 0.5 * (b.x0 + b.x1), cy = 0.5 * (b.y0 + b.y1);
  const double px = ox + 0.5 * style.panel_width, py = oy + 0.5 * style.panel_height;
  auto polyline = [&](const std::vector<Point2>& pts, const std::string& color, double width) {
    out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << fmt(width)
        << "\" stroke-linecap=\"round\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      out << (i ? " " : "") << fmt(px + scale * (pts[i].x() - cx)) << "," << fmt(py - scale * (pts[i].y() - cy));
    out << "\"/>\n";
  };
  polyline(t.main.points, style.main_color, 1.5 * style.stroke_width);
  for (std::size_t k = 0; k < t.laterals.size(); ++k) {
    const auto& l = t.laterals[k];
    if (l.branch.is_virtual) continue;
    const std::size_t label = labels && k < labels->size() ? (*labels)[k] : k;
    polyline(l.branch.points, style.color(label), style.stroke_width);
  }
}

}  // namespace detail

/// Trees side by side at a common scale. `labels[i][k]` is the correspondence
/// label of lateral k in tree i; without labels, lateral indices are used.
inline std::string render_panels(const std::vector<RootTree>& trees,
                                 const std::vector<std::vector<std::size_t>>& labels = {},
                                 const RenderStyle& style = {}) {
  style.validate();
  double span_w = 1e-12, span_h = 1e-12;
  for (const auto& t : trees) {
    const auto b = detail::bounds(t);
    span_w = std::max(span_w, b.w());
    span_h = std::max(span_h, b.h());
  }
  const double inner_w = std::max(style.panel_width - 2 * style.margin, 1.0);
  const double inner_h = std::max(style.panel_height - 2 * style.margin, 1.0);
  const double scale = std::min(inner_w / span_w, inner_h / span_h);
  const double width = style.panel_width * static_cast<double>(std::max<std::size_t>(trees.size(), 1));

  std::ostringstream out;
  out << detail::svg_header(width, style.panel_height);
  for (std::size_t i = 0; i < trees.size(); ++i) {
    out << " <g id=\"panel" << i << "\">\n";
    out << "  <title>" << detail::xml_escape(trees[i].id) << "</title>\n";
    detail::draw_tree(out, trees[i], i < labels.size() ? &labels[i] : nullptr, style,
                      style.panel_width * static_cast<double>(i), 0.0, scale);
    out << " </g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

inline std::string render_tree(const RootTree& tree, const RenderStyle& style = {},
                               const std::optional<std::vector<std::size_t>>& labels = std::nullopt) {
  std::vector<std::vector<std::size_t>> l;
  if (labels) l.push_back(*labels);
  return render_panels({tree}, l, style);
}

/// Classic dendrogram: leaves along the bottom, merge height upward.
inline std::string render_dendrogram(const Dendrogram& d, const RenderStyle& style = {}) {
  style.validate();
  const std::size_t m = d.leaf_count();
  const double width = std::max(2 * style.margin + 24.0 * static_cast<double>(m), 200.0);
  const double height = std::max(style.panel_height, 200.0);
  const double label_room = 60.0;
  double top = 0.0;
  for (const auto& mg : d.merges) top = std::max(top, mg.height);
  if (!(top > 0.0)) top = 1.0;

  const auto order = leaf_order(d);
  std::vector<double> x(m + d.merges.size(), 0.0), y(m + d.merges.size(), 0.0);
  const double base = height - label_room;
  const double step = m > 1 ? (width - 2 * style.margin) / static_cast<double>(m - 1) : 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    x[order[i]] = style.margin + step * static_cast<double>(i) + (m == 1 ? 0.5 * (width - 2 * style.margin) : 0.0);
    y[order[i]] = base;
  }
  const auto to_y = [&](double h) { return base - (base - style.margin) * h / top; };

  std::ostringstream out;
  out << detail::svg_header(width, height);
  for (std::size_t i = 0; i < d.merges.size(); ++i) {
    const auto& mg = d.merges[i];
    const std::size_t id = m + i;
    x[id] = 0.5 * (x[mg.left] + x[mg.right]);
    y[id] = to_y(mg.height);
    out << "  <polyline fill=\"none\" stroke=\"" << style.main_color << "\" stroke-width=\""
        << detail::fmt(style.stroke_width) << "\" points=\"" << detail::fmt(x[mg.left]) << "," << detail::fmt(y[mg.left])
        << " " << detail::fmt(x[mg.left]) << "," << detail::fmt(y[id]) << " " << detail::fmt(x[mg.right]) << ","
        << detail::fmt(y[id]) << " " << detail::fmt(x[mg.right]) << "," << detail::fmt(y[mg.right]) << "\"/>\n";
  }
  for (std::size_t leaf = 0; leaf < m; ++leaf) {
    out << "  <text x=\"" << detail::fmt(x[leaf]) << "\" y=\"" << detail::fmt(base + 8.0)
        << "\" font-size=\"10\" font-family=\"sans-serif\" transform=\"rotate(90 " << detail::fmt(x[leaf]) << " "
        << detail::fmt(base + 8.0) << ")\">" << detail::xml_escape(d.leaf_labels[leaf]) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace treeshape
