#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tbme {

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c; break;
    }
  }
  return out;
}

}  // namespace detail

/// Minimal raw-tag SVG canvas with a single data viewport (y flipped so data
/// y grows upward). All drawing is appended in call order.
class SvgCanvas {
 public:
  SvgCanvas(double width, double height) : width_(width), height_(height) {}

  /// Maps data rectangle [xmin,xmax]x[ymin,ymax] to the pixel viewport with
  /// the given margin on every side.
  void set_view(double xmin, double xmax, double ymin, double ymax, double margin = 45.0) {
    vx_ = margin;
    vy_ = margin;
    vw_ = width_ - 2 * margin;
    vh_ = height_ - 2 * margin;
    xmin_ = xmin;
    xmax_ = xmax > xmin ? xmax : xmin + 1.0;
    ymin_ = ymin;
    ymax_ = ymax > ymin ? ymax : ymin + 1.0;
  }

  double px(double x) const { return vx_ + (x - xmin_) / (xmax_ - xmin_) * vw_; }
  double py(double y) const { return vy_ + (1.0 - (y - ymin_) / (ymax_ - ymin_)) * vh_; }

  void circle(double x, double y, double r_px, const std::string& color,
              double opacity = 1.0) {
    body_ << "  <circle cx=\"" << detail::svg_num(px(x)) << "\" cy=\""
          << detail::svg_num(py(y)) << "\" r=\"" << detail::svg_num(r_px) << "\" fill=\""
          << color << "\" fill-opacity=\"" << detail::svg_num(opacity) << "\"/>\n";
  }

  /// Rectangle in data coordinates.
  void rect(double x0, double y0, double x1, double y1, const std::string& fill,
            const std::string& stroke = "none") {
    const double X0 = px(std::min(x0, x1)), X1 = px(std::max(x0, x1));
    const double Y0 = py(std::max(y0, y1)), Y1 = py(std::min(y0, y1));
    body_ << "  <rect x=\"" << detail::svg_num(X0) << "\" y=\"" << detail::svg_num(Y0)
          << "\" width=\"" << detail::svg_num(X1 - X0) << "\" height=\""
          << detail::svg_num(Y1 - Y0) << "\" fill=\"" << fill << "\" stroke=\"" << stroke
          << "\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                double width_px = 1.5) {
    if (pts.size() < 2) return;
    body_ << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
          << detail::svg_num(width_px) << "\" points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
      if (i) body_ << ' ';
      body_ << detail::svg_num(px(pts[i].first)) << ',' << detail::svg_num(py(pts[i].second));
    }
    body_ << "\"/>\n";
  }

  /// Text at pixel coordinates (layout elements live outside the data view).
  void text_px(double x, double y, const std::string& s, double size = 12.0,
               const std::string& anchor = "start") {
    body_ << "  <text x=\"" << detail::svg_num(x) << "\" y=\"" << detail::svg_num(y)
          << "\" font-family=\"sans-serif\" font-size=\"" << detail::svg_num(size)
          << "\" text-anchor=\"" << anchor << "\" fill=\"#333\">" << detail::xml_escape(s)
          << "</text>\n";
  }

  void frame() {
    body_ << "  <rect x=\"" << detail::svg_num(vx_) << "\" y=\"" << detail::svg_num(vy_)
          << "\" width=\"" << detail::svg_num(vw_) << "\" height=\"" << detail::svg_num(vh_)
          << "\" fill=\"none\" stroke=\"#000\" stroke-width=\"1\"/>\n";
  }

  void title(const std::string& s) { text_px(width_ / 2, 24.0, s, 14.0, "middle"); }

  std::string str() const {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::svg_num(width_)
        << "\" height=\"" << detail::svg_num(height_) << "\" viewBox=\"0 0 "
        << detail::svg_num(width_) << ' ' << detail::svg_num(height_) << "\">\n"
        << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("SvgCanvas::write: cannot open " + path);
    out << str();
  }

  double vx_ = 0, vy_ = 0, vw_ = 0, vh_ = 0;

 private:
  double width_, height_;
  double xmin_ = 0, xmax_ = 1, ymin_ = 0, ymax_ = 1;
  std::ostringstream body_;
};

struct ScatterLayer {
  Eigen::MatrixXd points;  // n x 2, already projected
  std::string color;
  double radius_px = 1.5;
  double opacity = 0.8;
  std::string label;
};

/// Overlay scatter plot of point layers sharing one data viewport.
inline void write_scatter_svg(const std::string& path, const std::vector<ScatterLayer>& layers,
                              const std::string& title) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& l : layers) {
    if (l.points.rows() == 0) continue;
    const double lx0 = l.points.col(0).minCoeff(), lx1 = l.points.col(0).maxCoeff();
    const double ly0 = l.points.col(1).minCoeff(), ly1 = l.points.col(1).maxCoeff();
    if (first) {
      xmin = lx0; xmax = lx1; ymin = ly0; ymax = ly1;
      first = false;
    } else {
      xmin = std::min(xmin, lx0); xmax = std::max(xmax, lx1);
      ymin = std::min(ymin, ly0); ymax = std::max(ymax, ly1);
    }
  }
  const double padx = 0.05 * (xmax - xmin + 1e-12), pady = 0.05 * (ymax - ymin + 1e-12);
  SvgCanvas canvas(640, 640);
  canvas.set_view(xmin - padx, xmax + padx, ymin - pady, ymax + pady);
  canvas.frame();
  canvas.title(title);
  for (const auto& l : layers)
    for (Eigen::Index i = 0; i < l.points.rows(); ++i)
      canvas.circle(l.points(i, 0), l.points(i, 1), l.radius_px, l.color, l.opacity);
  double ly = 40.0;
  for (const auto& l : layers) {
    if (l.label.empty()) continue;
    canvas.text_px(56.0, ly, l.label, 11.0);
    ly += 14.0;
  }
  canvas.write(path);
}

/// Side-by-side histogram bars per series over [0,1] (normalized errors).
inline void write_histogram_svg(const std::string& path,
                                const std::vector<std::pair<std::string, std::vector<double>>>& series,
                                int bins, const std::string& title) {
  if (bins < 1) throw std::invalid_argument("write_histogram_svg: bins >= 1");
  const std::vector<std::string> palette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};
  std::vector<std::vector<int>> counts(series.size(), std::vector<int>(bins, 0));
  int max_count = 1;
  for (size_t s = 0; s < series.size(); ++s) {
    for (double v : series[s].second) {
      int b = static_cast<int>(std::floor(v * bins));
      b = std::clamp(b, 0, bins - 1);
      max_count = std::max(max_count, ++counts[s][b]);
    }
  }
  SvgCanvas canvas(640, 420);
  canvas.set_view(0.0, 1.0, 0.0, static_cast<double>(max_count) * 1.05);
  canvas.frame();
  canvas.title(title);
  const double group_w = 1.0 / bins;
  const double bar_w = group_w / (series.size() + 1);
  for (size_t s = 0; s < series.size(); ++s) {
    const std::string& color = palette[s % palette.size()];
    for (int b = 0; b < bins; ++b) {
      if (counts[s][b] == 0) continue;
      const double x0 = b * group_w + (s + 0.5) * bar_w;
      canvas.rect(x0, 0.0, x0 + bar_w, counts[s][b], color);
    }
    canvas.text_px(56.0, 40.0 + 14.0 * s, series[s].first, 11.0);
  }
  canvas.write(path);
}

/// Heatmap over a (rows x cols) grid of values with row/column labels; cells
/// colored on a white-to-blue ramp by value rank within [vmin, vmax].
inline void write_heatmap_svg(const std::string& path, const Eigen::MatrixXd& values,
                              const std::vector<std::string>& row_labels,
                              const std::vector<std::string>& col_labels,
                              const std::string& title) {
  if (values.rows() != static_cast<Eigen::Index>(row_labels.size()) ||
      values.cols() != static_cast<Eigen::Index>(col_labels.size()))
    throw std::invalid_argument("write_heatmap_svg: label/value shape mismatch");
  double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      if (std::isfinite(values(r, c))) {
        vmin = std::min(vmin, values(r, c));
        vmax = std::max(vmax, values(r, c));
      }
  const double span = vmax > vmin ? vmax - vmin : 1.0;
  SvgCanvas canvas(640, 480);
  canvas.set_view(0.0, static_cast<double>(values.cols()), 0.0,
                  static_cast<double>(values.rows()));
  canvas.title(title);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      // row 0 at the top; missing cells stay white
      const double y0 = static_cast<double>(values.rows() - 1 - r);
      if (!std::isfinite(values(r, c))) {
        canvas.rect(static_cast<double>(c), y0, static_cast<double>(c + 1), y0 + 1.0,
                    "#ffffff", "#888");
        continue;
      }
      const double t = (values(r, c) - vmin) / span;
      const int other = static_cast<int>(std::lround(255.0 * (1.0 - 0.85 * t)));
      char color[16];
      std::snprintf(color, sizeof(color), "#%02x%02xff", other, other);
      canvas.rect(static_cast<double>(c), y0, static_cast<double>(c + 1), y0 + 1.0, color,
                  "#888");
      canvas.text_px(canvas.px(c + 0.5), canvas.py(y0 + 0.5) + 4.0,
                     detail::svg_num(values(r, c)), 10.0, "middle");
    }
  }
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    canvas.text_px(canvas.vx_ - 6.0, canvas.py(values.rows() - 0.5 - r) + 4.0, row_labels[r],
                   11.0, "end");
  for (Eigen::Index c = 0; c < values.cols(); ++c)
    canvas.text_px(canvas.px(c + 0.5), canvas.vy_ + canvas.vh_ + 16.0, col_labels[c], 11.0,
                   "middle");
  canvas.frame();
  canvas.write(path);
}

}  // namespace tbme
