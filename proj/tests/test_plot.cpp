#include <doctest.h>

#include <cmath>
#include <limits>

#include "disentangle/plot.hpp"
#include "test_support.hpp"

using namespace disent;
using testsup::TempDir;

namespace {

Rgb at(const Canvas& c, int x, int y) {
  const std::size_t i = 3 * (std::size_t(y) * c.width() + x);
  return {c.pixels()[i], c.pixels()[i + 1], c.pixels()[i + 2]};
}

bool is(const Rgb& a, const Rgb& b) {
  return a.r == b.r && a.g == b.g && a.b == b.b;
}

}  // namespace

TEST_CASE("canvas primitives and clipping") {
  Canvas c(10, 8, {255, 255, 255});
  CHECK(c.width() == 10);
  CHECK(c.height() == 8);
  CHECK(c.pixels().size() == 10u * 8 * 3);

  c.set(3, 2, {7, 8, 9});
  CHECK(is(at(c, 3, 2), {7, 8, 9}));
  CHECK(is(at(c, 2, 3), {255, 255, 255}));

  // out of range writes are silently dropped
  c.set(-1, 0, {1, 1, 1});
  c.set(10, 0, {1, 1, 1});
  c.set(0, 8, {1, 1, 1});
  CHECK(is(at(c, 0, 0), {255, 255, 255}));

  c.fill_rect(8, 6, 5, 5, {0, 0, 0});  // clipped at the border
  CHECK(is(at(c, 9, 7), {0, 0, 0}));
  CHECK(is(at(c, 7, 5), {255, 255, 255}));

  // horizontal line
  Canvas l(10, 3, {255, 255, 255});
  l.line(0, 1, 9, 1, {10, 20, 30});
  for (int x = 0; x < 10; ++x) CHECK(is(at(l, x, 1), {10, 20, 30}));

  // dashes leave gaps
  Canvas d(12, 1, {255, 255, 255});
  d.line(0, 0, 11, 0, {0, 0, 0}, 2);
  int on = 0;
  for (int x = 0; x < 12; ++x)
    if (is(at(d, x, 0), {0, 0, 0})) ++on;
  CHECK(on > 0);
  CHECK(on < 12);
}

TEST_CASE("text rendering occupies the advertised box") {
  const std::string s = "beta 1.0";
  CHECK(Canvas::text_width(s) == static_cast<int>(s.size()) * 6 - 1);
  CHECK(Canvas::text_height() == 7);
  CHECK(Canvas::text_width(s, 2) == 2 * (static_cast<int>(s.size()) * 6 - 1));

  Canvas c(80, 12, {255, 255, 255});
  c.text(1, 2, s, {0, 0, 0});
  int dark = 0;
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 80; ++x)
      if (is(at(c, x, y), {0, 0, 0})) ++dark;
  CHECK(dark > 20);  // several glyphs worth of ink
}

TEST_CASE("blit_gray maps the range and handles degenerate input") {
  Eigen::MatrixXd img(2, 2);
  img << 0.0, 1.0, 0.5, 1.0;
  Canvas c(4, 4, {1, 2, 3});
  c.blit_gray(img, 0, 0, 2, 0.0, 1.0);
  CHECK(at(c, 0, 0).r == 0);      // min maps to black
  CHECK(at(c, 2, 0).r == 255);    // max maps to white
  CHECK(at(c, 3, 3).r == 255);    // nearest-neighbor fills the 2x scale
  CHECK(at(c, 0, 2).r == 128);    // midpoint rounds half away from zero

  Canvas flat(2, 2, {9, 9, 9});
  flat.blit_gray(Eigen::MatrixXd::Constant(2, 2, 4.0), 0, 0, 1, 4.0, 4.0);
  const int v = at(flat, 0, 0).r;
  CHECK(v > 100);
  CHECK(v < 160);  // mid-gray for a degenerate range
}

TEST_CASE("save_png writes a valid signature and header") {
  TempDir dir("png");
  Canvas c(17, 9, {200, 100, 50});
  c.line(0, 0, 16, 8, {0, 0, 0});
  const auto path = dir.path() / "plot.png";
  save_png(c, path);

  const std::string bytes = testsup::read_file(path.string());
  REQUIRE(bytes.size() > 33);
  const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  for (int i = 0; i < 8; ++i)
    CHECK(static_cast<unsigned char>(bytes[i]) == sig[i]);
  // IHDR length 13 then the tag
  CHECK(bytes.substr(12, 4) == "IHDR");
  auto be32 = [&](std::size_t off) {
    return (std::uint32_t(std::uint8_t(bytes[off])) << 24) |
           (std::uint32_t(std::uint8_t(bytes[off + 1])) << 16) |
           (std::uint32_t(std::uint8_t(bytes[off + 2])) << 8) |
           std::uint32_t(std::uint8_t(bytes[off + 3]));
  };
  CHECK(be32(8) == 13u);   // IHDR payload size
  CHECK(be32(16) == 17u);  // width
  CHECK(be32(20) == 9u);   // height
  CHECK(bytes.find("IEND") != std::string::npos);

  // identical canvas, identical bytes
  const auto path2 = dir.path() / "plot2.png";
  save_png(c, path2);
  CHECK(testsup::read_file(path2.string()) == bytes);
}

TEST_CASE("line plot renders series, legend and reference lines") {
  LinePlot plot;
  plot.title = "objective against beta";
  plot.x_label = "beta";
  plot.y_label = "value";
  plot.log_x = true;
  plot.vlines.push_back(1.0);

  Series a;
  a.label = "solid";
  a.color = {200, 30, 30};
  Series b;
  b.label = "dashed";
  b.color = {30, 30, 200};
  b.dashed = true;
  for (int i = 0; i < 21; ++i) {
    const double x = 0.1 * std::pow(10.0, 2.0 * i / 20.0);
    a.x.push_back(x);
    a.y.push_back(std::log(x) * std::log(x));
    b.x.push_back(x);
    b.y.push_back(-std::log(x));
  }
  // a non-finite sample must break the polyline, not poison the plot
  a.y[10] = std::numeric_limits<double>::quiet_NaN();
  plot.series = {a, b};

  Canvas c = plot.render(400, 300);
  CHECK(c.width() == 400);
  CHECK(c.height() == 300);

  int red = 0, blue = 0;
  for (int y = 0; y < 300; ++y)
    for (int x = 0; x < 400; ++x) {
      const Rgb px = at(c, x, y);
      if (px.r > 150 && px.g < 100 && px.b < 100) ++red;
      if (px.b > 150 && px.r < 100 && px.g < 100) ++blue;
    }
  CHECK(red > 30);
  CHECK(blue > 30);

  TempDir dir("lineplot");
  const auto path = dir.path() / "lines.png";
  write_line_plot(plot, path);
  CHECK(std::filesystem::exists(path));
  CHECK(std::filesystem::file_size(path) > 500);
}
