#include "ecgsal/plot.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ecgsal/error.hpp"

namespace ecgsal::plot {

namespace {

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrey{170, 170, 170};
constexpr Rgb kNanGrey{220, 220, 220};

constexpr std::array<Rgb, 9> kViridis = {{{68, 1, 84},
                                          {72, 40, 120},
                                          {62, 73, 137},
                                          {49, 104, 142},
                                          {38, 130, 142},
                                          {31, 158, 137},
                                          {53, 183, 121},
                                          {110, 206, 88},
                                          {253, 231, 37}}};

// Line colours for correct / incorrect / all / total / confused.
constexpr std::array<Rgb, 5> kSeries = {{{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {127, 127, 127}, {255, 127, 14}}};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
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

struct Raster {
  int w, h;
  std::vector<std::uint8_t> px;

  Raster(int width, int height) : w(width), h(height), px(static_cast<std::size_t>(width * height * 3), 255) {}

  void blend(int x, int y, Rgb c, double a) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    auto* p = &px[static_cast<std::size_t>((y * w + x) * 3)];
    p[0] = static_cast<std::uint8_t>(std::lround(p[0] * (1 - a) + c.r * a));
    p[1] = static_cast<std::uint8_t>(std::lround(p[1] * (1 - a) + c.g * a));
    p[2] = static_cast<std::uint8_t>(std::lround(p[2] * (1 - a) + c.b * a));
  }

  void fill_rect(double x, double y, double rw, double rh, Rgb c) {
    const int x0 = static_cast<int>(std::floor(x)), x1 = static_cast<int>(std::ceil(x + rw));
    const int y0 = static_cast<int>(std::floor(y)), y1 = static_cast<int>(std::ceil(y + rh));
    for (int yy = y0; yy < y1; ++yy) {
      for (int xx = x0; xx < x1; ++xx) blend(xx, yy, c, 1.0);
    }
  }

  void line(Point a, Point b, Rgb c, double width) {
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const int steps = std::max(1, static_cast<int>(std::ceil(len * 2)));
    const int r = std::max(0, static_cast<int>(std::floor(width / 2)));
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      const int x = static_cast<int>(std::lround(a.x + t * (b.x - a.x)));
      const int y = static_cast<int>(std::lround(a.y + t * (b.y - a.y)));
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) blend(x + dx, y + dy, c, 1.0);
      }
    }
  }

  // Even-odd scanline fill sampled at pixel centres.
  void fill_polygon(const std::vector<Point>& pts, Rgb c, double a) {
    if (pts.size() < 3) return;
    double ymin = pts[0].y, ymax = pts[0].y;
    for (const auto& p : pts) {
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    std::vector<double> xs;
    for (int y = std::max(0, static_cast<int>(std::floor(ymin))); y <= std::min(h - 1, static_cast<int>(std::ceil(ymax)));
         ++y) {
      const double sy = y + 0.5;
      xs.clear();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const Point& p = pts[i];
        const Point& q = pts[(i + 1) % pts.size()];
        if ((p.y <= sy && q.y > sy) || (q.y <= sy && p.y > sy)) xs.push_back(p.x + (sy - p.y) / (q.y - p.y) * (q.x - p.x));
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
        for (int x = static_cast<int>(std::ceil(xs[i] - 0.5)); x <= static_cast<int>(std::floor(xs[i + 1] - 0.5)); ++x) {
          blend(x, y, c, a);
        }
      }
    }
  }
};

void frame(Scene& s, double x, double y, double w, double h) {
  s.polyline({{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}, {x, y}}, kBlack, 1.0);
}

void colorbar(Scene& s, double x, double y, double h) {
  constexpr int kSteps = 50;
  for (int i = 0; i < kSteps; ++i) {
    const double t = 1.0 - static_cast<double>(i) / kSteps;
    s.rect(x, y + h * i / kSteps, 14, h / kSteps + 0.5, viridis(t));
  }
  frame(s, x, y, 14, h);
  s.text(x + 18, y + 8, "1");
  s.text(x + 18, y + h, "0");
}

}  // namespace

Rgb viridis(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  const double pos = t * (kViridis.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), kViridis.size() - 2);
  const double f = pos - static_cast<double>(i);
  const Rgb a = kViridis[i], b = kViridis[i + 1];
  const auto mix = [f](std::uint8_t u, std::uint8_t v) {
    return static_cast<std::uint8_t>(std::lround(u + f * (static_cast<double>(v) - u)));
  };
  return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

std::string hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

Scene::Item& Scene::add(Item::Kind kind, std::vector<Point> pts, Rgb color) {
  Item& it = items_.emplace_back();
  it.kind = kind;
  it.pts = std::move(pts);
  it.color = color;
  return it;
}

void Scene::rect(double x, double y, double w, double h, Rgb fill) { add(Item::Rect, {{x, y}, {w, h}}, fill); }

void Scene::polyline(std::vector<Point> pts, Rgb stroke, double width) {
  add(Item::Line, std::move(pts), stroke).width = width;
}

void Scene::polygon(std::vector<Point> pts, Rgb fill, double opacity) {
  add(Item::Poly, std::move(pts), fill).opacity = opacity;
}

void Scene::text(double x, double y, std::string s, double size, const std::string& anchor) {
  Item& it = add(Item::Text, {{x, y}}, kBlack);
  it.text = std::move(s);
  it.size = size;
  it.anchor = anchor;
}

std::string Scene::to_svg() const {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\"" << height_
      << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (const auto& it : items_) {
    switch (it.kind) {
      case Item::Rect:
        out << "<rect x=\"" << num(it.pts[0].x) << "\" y=\"" << num(it.pts[0].y) << "\" width=\"" << num(it.pts[1].x)
            << "\" height=\"" << num(it.pts[1].y) << "\" fill=\"" << hex(it.color) << "\"/>\n";
        break;
      case Item::Line:
      case Item::Poly: {
        out << (it.kind == Item::Line ? "<polyline" : "<polygon") << " points=\"";
        for (std::size_t i = 0; i < it.pts.size(); ++i) out << (i ? " " : "") << num(it.pts[i].x) << ',' << num(it.pts[i].y);
        if (it.kind == Item::Line) {
          out << "\" fill=\"none\" stroke=\"" << hex(it.color) << "\" stroke-width=\"" << num(it.width) << "\"/>\n";
        } else {
          out << "\" fill=\"" << hex(it.color) << "\" fill-opacity=\"" << num(it.opacity) << "\" stroke=\"none\"/>\n";
        }
        break;
      }
      case Item::Text:
        out << "<text x=\"" << num(it.pts[0].x) << "\" y=\"" << num(it.pts[0].y) << "\" font-size=\"" << num(it.size)
            << "\" text-anchor=\"" << it.anchor << "\">" << escape(it.text) << "</text>\n";
        break;
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::vector<std::uint8_t> Scene::to_rgb() const {
  Raster r(width_, height_);
  for (const auto& it : items_) {
    switch (it.kind) {
      case Item::Rect: r.fill_rect(it.pts[0].x, it.pts[0].y, it.pts[1].x, it.pts[1].y, it.color); break;
      case Item::Line:
        for (std::size_t i = 0; i + 1 < it.pts.size(); ++i) r.line(it.pts[i], it.pts[i + 1], it.color, it.width);
        break;
      case Item::Poly: r.fill_polygon(it.pts, it.color, it.opacity); break;
      case Item::Text: break;
    }
  }
  return std::move(r.px);
}

void Scene::write(const std::filesystem::path& svg_path, const std::filesystem::path& png_path) const {
  std::ofstream svg(svg_path, std::ios::binary);
  if (!svg) fail(ErrorCode::Io, "cannot write " + svg_path.string());
  svg << to_svg();
  const auto rgb = to_rgb();
  write_png(png_path, width_, height_, rgb);
}

void write_png(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> rgb) {
  if (rgb.size() != static_cast<std::size_t>(width * height * 3)) fail(ErrorCode::InvalidArgument, "pixel buffer size");
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(ErrorCode::Io, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorCode::Io, "png encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y * width * 3)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

Scene confusion_heatmap(const evaluation::ConfusionMatrix& cm, const std::string& title) {
  constexpr double cell = 56, left = 110, top = 50;
  Scene s(static_cast<int>(left + cell * kNumClasses + 70), static_cast<int>(top + cell * kNumClasses + 70));
  s.text(left + cell * kNumClasses / 2, 24, title, 14, "middle");
  const auto grid = evaluation::row_normalize(cm);
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      const double x = left + cell * p, y = top + cell * t;
      const auto& v = grid[t][p];
      s.rect(x, y, cell, cell, v ? viridis(*v) : kNanGrey);
      s.text(x + cell / 2, y + cell / 2 + 4, evaluation::format4(v, "nan").substr(0, v ? 4 : 3), 10, "middle");
    }
    s.text(left - 6, top + cell * t + cell / 2 + 4, std::string(class_display_name(kAllClasses[t])), 10, "end");
    s.text(left + cell * t + cell / 2, top + cell * kNumClasses + 16, std::string(class_display_name(kAllClasses[t])),
           10, "middle");
  }
  s.text(left + cell * kNumClasses / 2, top + cell * kNumClasses + 40, "Predicted label", 12, "middle");
  s.text(14, top - 10, "True label", 12, "start");
  frame(s, left, top, cell * kNumClasses, cell * kNumClasses);
  colorbar(s, left + cell * kNumClasses + 16, top, cell * kNumClasses);
  return s;
}

Scene saliency_overlay(const beatset::BeatVector& beat, const saliency::SaliencyMap& map, const std::string& title) {
  if (map.values.size() != beatset::kVectorLength) fail(ErrorCode::ShapeMismatch, "saliency map must have 860 values");
  constexpr double left = 40, top = 40, panel_w = 430, panel_h = 200, gap = 30;
  Scene s(static_cast<int>(left + 2 * panel_w + gap + 60), static_cast<int>(top + panel_h + 50));
  s.text(left + panel_w + gap / 2, 22, title, 14, "middle");
  for (int lead = 0; lead < 2; ++lead) {
    const double x0 = left + lead * (panel_w + gap);
    const std::size_t base = static_cast<std::size_t>(lead) * beatset::kLeadSlot;
    for (std::size_t i = 0; i + 1 < beatset::kLeadSlot; ++i) {
      const auto px = [&](std::size_t k) {
        return Point{x0 + static_cast<double>(k), top + panel_h * (1.0 - beat.values[base + k])};
      };
      s.polyline({px(i), px(i + 1)}, viridis(map.values[base + i]), 2.0);
    }
    frame(s, x0, top, panel_w, panel_h);
    s.text(x0 + panel_w / 2, top + panel_h + 18, "Lead " + std::to_string(lead + 1), 11, "middle");
    s.polyline({{x0 + beatset::kRIndex, top + panel_h}, {x0 + beatset::kRIndex, top + panel_h + 5}}, kBlack);
  }
  colorbar(s, left + 2 * panel_w + gap + 10, top, panel_h);
  return s;
}

Scene segment_heatmap(std::span<const saliency::ClassSegmentProfile> profiles, const std::string& title) {
  constexpr double cell = 30, left = 100, top = 50;
  const double rows = static_cast<double>(std::max<std::size_t>(profiles.size(), 1));
  Scene s(static_cast<int>(left + cell * saliency::kGridBlocks + 70), static_cast<int>(top + cell * rows + 60));
  s.text(left + cell * saliency::kGridBlocks / 2, 24, title, 14, "middle");
  const auto& layout = saliency::block_layout();
  for (std::size_t r = 0; r < profiles.size(); ++r) {
    for (std::size_t b = 0; b < saliency::kGridBlocks; ++b) {
      s.rect(left + cell * b, top + cell * r, cell, cell, viridis(profiles[r].median[b]));
    }
    s.text(left - 6, top + cell * r + cell / 2 + 4, std::string(class_display_name(profiles[r].cls)), 10, "end");
  }
  for (std::size_t b = 0; b < saliency::kGridBlocks; ++b) {
    const std::string label = (layout[b].offset > 0 ? "+" : "") + std::to_string(layout[b].offset);
    s.text(left + cell * b + cell / 2, top + cell * rows + 14, label, 9, "middle");
  }
  s.text(left + cell * saliency::kBlocksPerLead / 2, top + cell * rows + 32, "Lead 1", 11, "middle");
  s.text(left + cell * (saliency::kBlocksPerLead * 1.5), top + cell * rows + 32, "Lead 2", 11, "middle");
  frame(s, left, top, cell * saliency::kGridBlocks, cell * rows);
  s.polyline({{left + cell * saliency::kBlocksPerLead, top}, {left + cell * saliency::kBlocksPerLead, top + cell * rows}},
             kWhite, 2.0);
  colorbar(s, left + cell * saliency::kGridBlocks + 16, top, cell * rows);
  return s;
}

Scene group_lines(const saliency::GroupComparison& cmp, const std::string& title) {
  constexpr double left = 50, top = 50, panel_w = 360, panel_h = 220, gap = 40;
  Scene s(static_cast<int>(left + 2 * panel_w + gap + 150), static_cast<int>(top + panel_h + 50));
  s.text(left + panel_w + gap / 2, 24, title, 14, "middle");
  double ymax = 1e-9;
  const std::array<const std::optional<saliency::ClassSegmentProfile>*, 5> series = {
      &cmp.correct, &cmp.incorrect, nullptr, &cmp.total, &cmp.confused_profile};
  const auto profile_at = [&](std::size_t k) -> const saliency::ClassSegmentProfile* {
    if (k == 2) return &cmp.all;
    return *series[k] ? &**series[k] : nullptr;
  };
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (const auto* p = profile_at(k)) ymax = std::max(ymax, *std::max_element(p->q75.begin(), p->q75.end()));
  }
  const std::array<std::string, 5> names = {"correct", "incorrect", "all", "total",
                                            cmp.confused_class ? "confused: " + std::string(class_key(*cmp.confused_class))
                                                               : "confused"};
  for (int lead = 0; lead < 2; ++lead) {
    const double x0 = left + lead * (panel_w + gap);
    const auto px = [&](std::size_t j, double v) {
      return Point{x0 + panel_w * (j + 0.5) / saliency::kBlocksPerLead, top + panel_h * (1.0 - v / ymax)};
    };
    for (std::size_t k = 0; k < series.size(); ++k) {
      const auto* p = profile_at(k);
      if (!p) continue;
      std::vector<Point> band, line;
      for (std::size_t j = 0; j < saliency::kBlocksPerLead; ++j) {
        const std::size_t b = static_cast<std::size_t>(lead) * saliency::kBlocksPerLead + j;
        band.push_back(px(j, p->q75[b]));
        line.push_back(px(j, p->median[b]));
      }
      for (std::size_t j = saliency::kBlocksPerLead; j-- > 0;) {
        band.push_back(px(j, p->q25[static_cast<std::size_t>(lead) * saliency::kBlocksPerLead + j]));
      }
      s.polygon(band, kSeries[k], 0.2);
      s.polyline(line, kSeries[k], 2.0);
    }
    frame(s, x0, top, panel_w, panel_h);
    s.polyline({{x0 + panel_w / 2, top}, {x0 + panel_w / 2, top + panel_h}}, kGrey);
    s.text(x0 + panel_w / 2, top + panel_h + 16, "R peak", 10, "middle");
    s.text(x0 + panel_w / 2, top + panel_h + 34, "Lead " + std::to_string(lead + 1), 11, "middle");
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (!profile_at(k)) continue;
    const double y = top + 14 + 18 * static_cast<double>(k);
    const double x = left + 2 * panel_w + gap + 12;
    s.polyline({{x, y - 4}, {x + 20, y - 4}}, kSeries[k], 3.0);
    s.text(x + 26, y, names[k], 10);
  }
  return s;
}

}  // namespace ecgsal::plot
