#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "mvrad/artifacts.hpp"

namespace mvrad {

namespace {

struct Rgb {
  double r, g, b;
};

// Five anchors of the viridis ramp, interpolated linearly.
constexpr std::array<Rgb, 5> kRamp{{{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};

std::string ramp_color(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  const double pos = t * static_cast<double>(kRamp.size() - 1);
  const std::size_t lo = std::min(static_cast<std::size_t>(pos), kRamp.size() - 2);
  const double f = pos - static_cast<double>(lo);
  const Rgb& a = kRamp[lo];
  const Rgb& b = kRamp[lo + 1];
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(a.r + f * (b.r - a.r))),
                static_cast<int>(std::lround(a.g + f * (b.g - a.g))), static_cast<int>(std::lround(a.b + f * (b.b - a.b))));
  return buf;
}

std::string f3(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  // Avoid "-0.000" so output does not depend on the sign of tiny values.
  if (std::string(buf) == "-0.000") return "0.000";
  return buf;
}

std::string escape_xml(const std::string& s) {
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

std::string svg_open(int width, int height) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
         std::to_string(width) + " " + std::to_string(height) +
         "\" font-family=\"sans-serif\">\n<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" fill=\"#ffffff\"/>\n";
}

std::string text(double x, double y, const std::string& body, int size, const char* anchor = "start") {
  return "<text x=\"" + f3(x) + "\" y=\"" + f3(y) + "\" font-size=\"" + std::to_string(size) + "\" text-anchor=\"" +
         anchor + "\">" + escape_xml(body) + "</text>\n";
}

std::string line(double x1, double y1, double x2, double y2, const char* stroke, const char* extra = "") {
  return "<line x1=\"" + f3(x1) + "\" y1=\"" + f3(y1) + "\" x2=\"" + f3(x2) + "\" y2=\"" + f3(y2) + "\" stroke=\"" +
         stroke + "\"" + extra + "/>\n";
}

constexpr std::array<double, 3> kContourLevels{0.3, 0.5, 0.7};
constexpr std::array<const char*, 3> kContourDash{" stroke-dasharray=\"2 3\"", "", " stroke-dasharray=\"7 4\""};

struct Segment {
  double x1, y1, x2, y2;
};

// Marching squares over a grid stored row-major as values[iy * nx + ix].
std::vector<Segment> contour_segments(const std::vector<double>& values, std::size_t nx, std::size_t ny,
                                      const std::vector<double>& gx, const std::vector<double>& gy, double level) {
  std::vector<Segment> segs;
  auto interp = [&](double xa, double ya, double va, double xb, double yb, double vb) {
    const double t = (level - va) / (vb - va);
    return std::array<double, 2>{xa + t * (xb - xa), ya + t * (yb - ya)};
  };
  for (std::size_t iy = 0; iy + 1 < ny; ++iy) {
    for (std::size_t ix = 0; ix + 1 < nx; ++ix) {
      const double v00 = values[iy * nx + ix], v10 = values[iy * nx + ix + 1];
      const double v01 = values[(iy + 1) * nx + ix], v11 = values[(iy + 1) * nx + ix + 1];
      const double x0 = gx[ix], x1 = gx[ix + 1], y0 = gy[iy], y1 = gy[iy + 1];
      std::vector<std::array<double, 2>> cross;
      // edges in order: bottom, right, top, left
      if ((v00 >= level) != (v10 >= level)) cross.push_back(interp(x0, y0, v00, x1, y0, v10));
      if ((v10 >= level) != (v11 >= level)) cross.push_back(interp(x1, y0, v10, x1, y1, v11));
      if ((v11 >= level) != (v01 >= level)) cross.push_back(interp(x1, y1, v11, x0, y1, v01));
      if ((v01 >= level) != (v00 >= level)) cross.push_back(interp(x0, y1, v01, x0, y0, v00));
      if (cross.size() == 2) {
        segs.push_back({cross[0][0], cross[0][1], cross[1][0], cross[1][1]});
      } else if (cross.size() == 4) {
        const bool centre_high = (v00 + v10 + v01 + v11) / 4.0 >= level;
        const bool v00_high = v00 >= level;
        if (centre_high == v00_high) {
          segs.push_back({cross[0][0], cross[0][1], cross[1][0], cross[1][1]});
          segs.push_back({cross[2][0], cross[2][1], cross[3][0], cross[3][1]});
        } else {
          segs.push_back({cross[0][0], cross[0][1], cross[3][0], cross[3][1]});
          segs.push_back({cross[1][0], cross[1][1], cross[2][0], cross[2][1]});
        }
      }
    }
  }
  return segs;
}

}  // namespace

std::string render_auc_bar_svg(const Report& report) {
  const int width = 720, height = 440;
  const double left = 70, right = 20, top = 50, bottom = 110;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  auto ypix = [&](double auc) { return top + (1.0 - auc) * plot_h; };

  std::string svg = svg_open(width, height);
  svg += text(width / 2.0, 28, "Test AUC by model", 16, "middle");
  for (int i = 0; i <= 4; ++i) {
    const double v = 0.25 * i;
    svg += line(left, ypix(v), left + plot_w, ypix(v), "#dddddd");
    svg += text(left - 8, ypix(v) + 4, f3(v), 11, "end");
  }
  svg += line(left, top, left, top + plot_h, "#333333");
  svg += line(left, top + plot_h, left + plot_w, top + plot_h, "#333333");
  svg += text(18, top + plot_h / 2, "AUC", 12, "middle");

  const std::size_t n = report.models.size();
  const double slot = n ? plot_w / static_cast<double>(n) : plot_w;
  for (std::size_t i = 0; i < n; ++i) {
    const ModelResult& m = report.models[i];
    const double auc = std::clamp(m.auc, 0.0, 1.0);
    const double x = left + slot * static_cast<double>(i) + slot * 0.2;
    const double w = slot * 0.6;
    const std::string colour = ramp_color(n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.5);
    svg += "<rect x=\"" + f3(x) + "\" y=\"" + f3(ypix(auc)) + "\" width=\"" + f3(w) + "\" height=\"" +
           f3(top + plot_h - ypix(auc)) + "\" fill=\"" + colour + "\"/>\n";
    svg += text(x + w / 2, ypix(auc) - 6, f3(m.auc), 11, "middle");
    svg += text(x + w / 2, top + plot_h + 18, m.name, 11, "middle");
  }
  svg += line(left, ypix(0.5), left + plot_w, ypix(0.5), "#c0392b", " stroke-dasharray=\"6 4\"");
  svg += text(left + plot_w - 4, ypix(0.5) - 6, "chance (0.5)", 11, "end");
  if (report.oracle_auc) {
    svg += line(left, ypix(*report.oracle_auc), left + plot_w, ypix(*report.oracle_auc), "#555555",
                " stroke-dasharray=\"2 3\"");
    svg += text(left + 4, ypix(*report.oracle_auc) - 6, "generator oracle " + f3(*report.oracle_auc), 11);
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_latent_scatter_svg(const LatentProjection& projection, std::optional<double> test_auc) {
  const int width = 720, height = 600;
  const double left = 60, top = 60, plot_w = 480, plot_h = 480;
  const std::size_t n = projection.subject_ids.size();

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (n > 0) {
    xmin = projection.coords.col(0).minCoeff();
    xmax = projection.coords.col(0).maxCoeff();
    ymin = projection.coords.col(1).minCoeff();
    ymax = projection.coords.col(1).maxCoeff();
  }
  if (!(xmax > xmin)) xmin -= 1, xmax += 1;
  if (!(ymax > ymin)) ymin -= 1, ymax += 1;
  const double xpad = 0.05 * (xmax - xmin), ypad = 0.05 * (ymax - ymin);
  xmin -= xpad, xmax += xpad, ymin -= ypad, ymax += ypad;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * plot_w; };
  auto py = [&](double y) { return top + (1.0 - (y - ymin) / (ymax - ymin)) * plot_h; };

  std::string svg = svg_open(width, height);
  std::string title = "Latent projection (" + projection.method + "), " + projection.model;
  if (test_auc) title += ", test AUC " + f3(*test_auc);
  svg += text(left + plot_w / 2, 30, title, 15, "middle");
  svg += "<rect x=\"" + f3(left) + "\" y=\"" + f3(top) + "\" width=\"" + f3(plot_w) + "\" height=\"" + f3(plot_h) +
         "\" fill=\"none\" stroke=\"#333333\"/>\n";
  svg += text(left + plot_w / 2, top + plot_h + 32, "component 1 (var " + f3(projection.variance[0]) + ")", 12,
              "middle");
  svg += "<text x=\"" + f3(left - 30) + "\" y=\"" + f3(top + plot_h / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 " + f3(left - 30) + " " +
         f3(top + plot_h / 2) + ")\">component 2 (var " + f3(projection.variance[1]) + ")</text>\n";

  // Smoothed probability field: Gaussian-weighted average of nearby points'
  // predictions, evaluated on a regular grid.
  if (n > 0) {
    constexpr std::size_t kGrid = 60;
    const double hx = 0.1 * (xmax - xmin), hy = 0.1 * (ymax - ymin);
    std::vector<double> gx(kGrid), gy(kGrid), field(kGrid * kGrid);
    for (std::size_t i = 0; i < kGrid; ++i) {
      gx[i] = xmin + (xmax - xmin) * static_cast<double>(i) / static_cast<double>(kGrid - 1);
      gy[i] = ymin + (ymax - ymin) * static_cast<double>(i) / static_cast<double>(kGrid - 1);
    }
    for (std::size_t iy = 0; iy < kGrid; ++iy) {
      for (std::size_t ix = 0; ix < kGrid; ++ix) {
        double wsum = 0, psum = 0;
        for (std::size_t k = 0; k < n; ++k) {
          const auto r = static_cast<Eigen::Index>(k);
          const double dx = (projection.coords(r, 0) - gx[ix]) / hx;
          const double dy = (projection.coords(r, 1) - gy[iy]) / hy;
          const double w = std::exp(-0.5 * (dx * dx + dy * dy));
          wsum += w;
          psum += w * projection.probability[k];
        }
        field[iy * kGrid + ix] = wsum > 1e-300 ? psum / wsum : 0.5;
      }
    }
    for (std::size_t c = 0; c < kContourLevels.size(); ++c) {
      const auto segs = contour_segments(field, kGrid, kGrid, gx, gy, kContourLevels[c]);
      if (segs.empty()) continue;
      std::string d;
      for (const Segment& s : segs) {
        d += "M" + f3(px(s.x1)) + " " + f3(py(s.y1)) + "L" + f3(px(s.x2)) + " " + f3(py(s.y2));
      }
      svg += "<path d=\"" + d + "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1.2\"" + kContourDash[c] + "/>\n";
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    const char* shape_stroke = projection.labels[k] ? "#000000" : "#bbbbbb";
    svg += "<circle cx=\"" + f3(px(projection.coords(r, 0))) + "\" cy=\"" + f3(py(projection.coords(r, 1))) +
           "\" r=\"4.5\" fill=\"" + ramp_color(projection.probability[k]) + "\" stroke=\"" + shape_stroke +
           "\" stroke-width=\"0.8\"/>\n";
  }

  // Legend: colour ramp, contour styles, label outlines.
  const double lx = left + plot_w + 30;
  svg += text(lx, top + 10, "P(methylated)", 12);
  constexpr int kSteps = 20;
  for (int i = 0; i < kSteps; ++i) {
    const double t = 1.0 - static_cast<double>(i) / (kSteps - 1);
    svg += "<rect x=\"" + f3(lx) + "\" y=\"" + f3(top + 20 + i * 8.0) + "\" width=\"18\" height=\"8\" fill=\"" +
           ramp_color(t) + "\"/>\n";
  }
  svg += text(lx + 24, top + 30, "1.0", 11);
  svg += text(lx + 24, top + 20 + kSteps * 8.0, "0.0", 11);
  double ly = top + 220;
  svg += text(lx, ly, "contours", 12);
  for (std::size_t c = 0; c < kContourLevels.size(); ++c) {
    ly += 20;
    svg += line(lx, ly - 4, lx + 28, ly - 4, "#444444", kContourDash[c]);
    svg += text(lx + 34, ly, "p = " + f3(kContourLevels[c]).substr(0, 3), 11);
  }
  ly += 36;
  svg += "<circle cx=\"" + f3(lx + 8) + "\" cy=\"" + f3(ly - 4) +
         "\" r=\"4.5\" fill=\"#999999\" stroke=\"#000000\" stroke-width=\"0.8\"/>\n";
  svg += text(lx + 20, ly, "methylated", 11);
  ly += 18;
  svg += "<circle cx=\"" + f3(lx + 8) + "\" cy=\"" + f3(ly - 4) +
         "\" r=\"4.5\" fill=\"#999999\" stroke=\"#bbbbbb\" stroke-width=\"0.8\"/>\n";
  svg += text(lx + 20, ly, "unmethylated", 11);
  svg += "</svg>\n";
  return svg;
}

}  // namespace mvrad
