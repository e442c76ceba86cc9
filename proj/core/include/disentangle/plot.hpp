#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace disent {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

// Flat RGB8 raster with integer drawing primitives. Out-of-bounds pixels
// are clipped, never an error, so callers can draw without pre-clipping.
class Canvas {
 public:
  Canvas(int width, int height, Rgb fill = {255, 255, 255});

  int width() const { return w_; }
  int height() const { return h_; }

  void set(int x, int y, Rgb c);
  void fill_rect(int x, int y, int w, int h, Rgb c);
  // Bresenham; dash > 0 alternates dash pixels on, dash pixels off.
  void line(int x0, int y0, int x1, int y1, Rgb c, int dash = 0);
  // 5x7 bitmap font, (x, y) is the top-left corner of the first glyph.
  void text(int x, int y, std::string_view s, Rgb c, int scale = 1);
  static int text_width(std::string_view s, int scale = 1);
  static int text_height(int scale = 1) { return 7 * scale; }

  // Grayscale image, nearest-neighbor scaled; values mapped [lo, hi] ->
  // black..white. Degenerate ranges render mid-gray.
  void blit_gray(const Eigen::MatrixXd& img, int x, int y, int scale,
                 double lo, double hi);

  const std::vector<std::uint8_t>& pixels() const { return px_; }

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;  // 3 bytes per pixel, row-major
};

// Minimal PNG encoder (8-bit RGB, zlib-compressed, filter 0 scanlines).
void save_png(const Canvas& canvas, const std::filesystem::path& path);

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string label;
  Rgb color{0, 0, 0};
  bool dashed = false;
};

// Line chart with framed axes, ticks, optional log-10 x scale, legend and
// dashed reference verticals. Non-finite samples break the polyline.
struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<Series> series;
  std::vector<double> vlines;

  Canvas render(int width = 900, int height = 620) const;
};

void write_line_plot(const LinePlot& plot, const std::filesystem::path& path);

}  // namespace disent
