#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ecgsal/beatset.hpp"
#include "ecgsal/evaluation.hpp"
#include "ecgsal/saliency.hpp"

namespace ecgsal::plot {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

Rgb viridis(double t);  // t clamped to [0,1]
std::string hex(Rgb c);

struct Point {
  double x = 0, y = 0;
};

// Minimal vector scene rendered both to SVG and to an RGB raster. Text only
// appears in the SVG output.
class Scene {
 public:
  Scene(int width, int height) : width_(width), height_(height) {}

  void rect(double x, double y, double w, double h, Rgb fill);
  void polyline(std::vector<Point> pts, Rgb stroke, double width = 1.0);
  void polygon(std::vector<Point> pts, Rgb fill, double opacity = 1.0);
  void text(double x, double y, std::string s, double size = 11.0, const std::string& anchor = "start");

  std::string to_svg() const;
  std::vector<std::uint8_t> to_rgb() const;  // width*height*3, row-major
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  void write(const std::filesystem::path& svg_path, const std::filesystem::path& png_path) const;

 private:
  struct Item {
    enum Kind { Rect, Line, Poly, Text } kind = Rect;
    std::vector<Point> pts;
    Rgb color;
    double width = 1.0;
    double opacity = 1.0;
    std::string text;
    double size = 11.0;
    std::string anchor;
  };
  Item& add(Item::Kind kind, std::vector<Point> pts, Rgb color);
  int width_, height_;
  std::vector<Item> items_;
};

void write_png(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> rgb);

Scene confusion_heatmap(const evaluation::ConfusionMatrix& cm, const std::string& title);
Scene saliency_overlay(const beatset::BeatVector& beat, const saliency::SaliencyMap& map, const std::string& title);
Scene segment_heatmap(std::span<const saliency::ClassSegmentProfile> profiles, const std::string& title);
Scene group_lines(const saliency::GroupComparison& cmp, const std::string& title);

}  // namespace ecgsal::plot
