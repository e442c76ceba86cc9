#include "disentangle/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <zlib.h>

namespace disent {

namespace {

// 5x7 font, ASCII 32..126. Five column bytes per glyph, bit 0 = top row.
// The shapes follow the classic GLCD bitmap font.
constexpr std::uint8_t kFont[95][5] = {
    {0x00, 0x00, 0x00, 0x00, 0x00},  // ' '
    {0x00, 0x00, 0x5F, 0x00, 0x00},  // !
    {0x00, 0x03, 0x00, 0x03, 0x00},  // "
    {0x14, 0x7F, 0x14, 0x7F, 0x14},  // #
    {0x24, 0x2A, 0x7F, 0x2A, 0x12},  // $
    {0x23, 0x13, 0x08, 0x64, 0x62},  // %
    {0x36, 0x49, 0x55, 0x22, 0x50},  // &
    {0x00, 0x05, 0x03, 0x00, 0x00},  // '
    {0x00, 0x1C, 0x22, 0x41, 0x00},  // (
    {0x00, 0x41, 0x22, 0x1C, 0x00},  // )
    {0x08, 0x2A, 0x1C, 0x2A, 0x08},  // *
    {0x08, 0x08, 0x3E, 0x08, 0x08},  // +
    {0x00, 0x50, 0x30, 0x00, 0x00},  // ,
    {0x08, 0x08, 0x08, 0x08, 0x08},  // -
    {0x00, 0x60, 0x60, 0x00, 0x00},  // .
    {0x20, 0x10, 0x08, 0x04, 0x02},  // /
    {0x3E, 0x51, 0x49, 0x45, 0x3E},  // 0
    {0x00, 0x42, 0x7F, 0x40, 0x00},  // 1
    {0x42, 0x61, 0x51, 0x49, 0x46},  // 2
    {0x21, 0x41, 0x45, 0x4B, 0x31},  // 3
    {0x18, 0x14, 0x12, 0x7F, 0x10},  // 4
    {0x27, 0x45, 0x45, 0x45, 0x39},  // 5
    {0x3C, 0x4A, 0x49, 0x49, 0x30},  // 6
    {0x01, 0x71, 0x09, 0x05, 0x03},  // 7
    {0x36, 0x49, 0x49, 0x49, 0x36},  // 8
    {0x06, 0x49, 0x49, 0x29, 0x1E},  // 9
    {0x00, 0x36, 0x36, 0x00, 0x00},  // :
    {0x00, 0x56, 0x36, 0x00, 0x00},  // ;
    {0x00, 0x08, 0x14, 0x22, 0x41},  // <
    {0x14, 0x14, 0x14, 0x14, 0x14},  // =
    {0x41, 0x22, 0x14, 0x08, 0x00},  // >
    {0x02, 0x01, 0x51, 0x09, 0x06},  // ?
    {0x32, 0x49, 0x79, 0x41, 0x3E},  // @
    {0x7E, 0x11, 0x11, 0x11, 0x7E},  // A
    {0x7F, 0x49, 0x49, 0x49, 0x36},  // B
    {0x3E, 0x41, 0x41, 0x41, 0x22},  // C
    {0x7F, 0x41, 0x41, 0x22, 0x1C},  // D
    {0x7F, 0x49, 0x49, 0x49, 0x41},  // E
    {0x7F, 0x09, 0x09, 0x09, 0x01},  // F
    {0x3E, 0x41, 0x41, 0x51, 0x32},  // G
    {0x7F, 0x08, 0x08, 0x08, 0x7F},  // H
    {0x00, 0x41, 0x7F, 0x41, 0x00},  // I
    {0x20, 0x40, 0x41, 0x3F, 0x01},  // J
    {0x7F, 0x08, 0x14, 0x22, 0x41},  // K
    {0x7F, 0x40, 0x40, 0x40, 0x40},  // L
    {0x7F, 0x02, 0x0C, 0x02, 0x7F},  // M
    {0x7F, 0x04, 0x08, 0x10, 0x7F},  // N
    {0x3E, 0x41, 0x41, 0x41, 0x3E},  // O
    {0x7F, 0x09, 0x09, 0x09, 0x06},  // P
    {0x3E, 0x41, 0x51, 0x21, 0x5E},  // Q
    {0x7F, 0x09, 0x19, 0x29, 0x46},  // R
    {0x46, 0x49, 0x49, 0x49, 0x31},  // S
    {0x01, 0x01, 0x7F, 0x01, 0x01},  // T
    {0x3F, 0x40, 0x40, 0x40, 0x3F},  // U
    {0x1F, 0x20, 0x40, 0x20, 0x1F},  // V
    {0x7F, 0x20, 0x18, 0x20, 0x7F},  // W
    {0x63, 0x14, 0x08, 0x14, 0x63},  // X
    {0x07, 0x08, 0x70, 0x08, 0x07},  // Y
    {0x61, 0x51, 0x49, 0x45, 0x43},  // Z
    {0x00, 0x7F, 0x41, 0x41, 0x00},  // [
    {0x02, 0x04, 0x08, 0x10, 0x20},  // backslash
    {0x00, 0x41, 0x41, 0x7F, 0x00},  // ]
    {0x04, 0x02, 0x01, 0x02, 0x04},  // ^
    {0x40, 0x40, 0x40, 0x40, 0x40},  // _
    {0x00, 0x01, 0x02, 0x04, 0x00},  // `
    {0x20, 0x54, 0x54, 0x54, 0x78},  // a
    {0x7F, 0x48, 0x44, 0x44, 0x38},  // b
    {0x38, 0x44, 0x44, 0x44, 0x20},  // c
    {0x38, 0x44, 0x44, 0x48, 0x7F},  // d
    {0x38, 0x54, 0x54, 0x54, 0x18},  // e
    {0x08, 0x7E, 0x09, 0x01, 0x02},  // f
    {0x0C, 0x52, 0x52, 0x52, 0x3E},  // g
    {0x7F, 0x08, 0x04, 0x04, 0x78},  // h
    {0x00, 0x44, 0x7D, 0x40, 0x00},  // i
    {0x20, 0x40, 0x44, 0x3D, 0x00},  // j
    {0x7F, 0x10, 0x28, 0x44, 0x00},  // k
    {0x00, 0x41, 0x7F, 0x40, 0x00},  // l
    {0x7C, 0x04, 0x18, 0x04, 0x78},  // m
    {0x7C, 0x08, 0x04, 0x04, 0x78},  // n
    {0x38, 0x44, 0x44, 0x44, 0x38},  // o
    {0x7C, 0x14, 0x14, 0x14, 0x08},  // p
    {0x08, 0x14, 0x14, 0x14, 0x7C},  // q
    {0x7C, 0x08, 0x04, 0x04, 0x08},  // r
    {0x48, 0x54, 0x54, 0x54, 0x20},  // s
    {0x04, 0x3F, 0x44, 0x40, 0x20},  // t
    {0x3C, 0x40, 0x40, 0x20, 0x7C},  // u
    {0x1C, 0x20, 0x40, 0x20, 0x1C},  // v
    {0x3C, 0x40, 0x30, 0x40, 0x3C},  // w
    {0x44, 0x28, 0x10, 0x28, 0x44},  // x
    {0x0C, 0x50, 0x50, 0x50, 0x3C},  // y
    {0x44, 0x64, 0x54, 0x4C, 0x44},  // z
    {0x00, 0x08, 0x36, 0x41, 0x00},  // {
    {0x00, 0x00, 0x7F, 0x00, 0x00},  // |
    {0x00, 0x41, 0x36, 0x08, 0x00},  // }
    {0x08, 0x04, 0x08, 0x10, 0x08},  // ~
};

std::string fmt_tick(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::vector<double> nice_ticks(double lo, double hi, int target) {
  const double raw = (hi - lo) / std::max(1, target);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag * 10.0;
  for (double m : {1.0, 2.0, 5.0}) {
    if (mag * m >= raw) {
      step = mag * m;
      break;
    }
  }
  std::vector<double> ticks;
  double v = std::ceil(lo / step) * step;
  for (; v <= hi + step * 1e-9; v += step) {
    double t = v;
    if (std::fabs(t) < step * 1e-9) t = 0.0;
    ticks.push_back(t);
  }
  return ticks;
}

}  // namespace

Canvas::Canvas(int width, int height, Rgb fill) : w_(width), h_(height) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("Canvas: non-positive size");
  px_.resize(std::size_t(3) * width * height);
  for (std::size_t i = 0; i < px_.size(); i += 3) {
    px_[i] = fill.r;
    px_[i + 1] = fill.g;
    px_[i + 2] = fill.b;
  }
}

void Canvas::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
  const std::size_t i = 3 * (std::size_t(y) * w_ + x);
  px_[i] = c.r;
  px_[i + 1] = c.g;
  px_[i + 2] = c.b;
}

void Canvas::fill_rect(int x, int y, int w, int h, Rgb c) {
  for (int yy = y; yy < y + h; ++yy)
    for (int xx = x; xx < x + w; ++xx) set(xx, yy, c);
}

void Canvas::line(int x0, int y0, int x1, int y1, Rgb c, int dash) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  int step = 0;
  for (;;) {
    if (dash <= 0 || (step / dash) % 2 == 0) set(x0, y0, c);
    ++step;
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Canvas::text(int x, int y, std::string_view s, Rgb c, int scale) {
  if (scale < 1) scale = 1;
  int pen = x;
  for (char ch : s) {
    unsigned idx = static_cast<unsigned char>(ch);
    if (idx < 32 || idx > 126) idx = '?';
    const std::uint8_t* g = kFont[idx - 32];
    for (int col = 0; col < 5; ++col)
      for (int row = 0; row < 7; ++row)
        if (g[col] >> row & 1)
          fill_rect(pen + col * scale, y + row * scale, scale, scale, c);
    pen += 6 * scale;
  }
}

int Canvas::text_width(std::string_view s, int scale) {
  if (scale < 1) scale = 1;
  if (s.empty()) return 0;
  return (6 * static_cast<int>(s.size()) - 1) * scale;
}

void Canvas::blit_gray(const Eigen::MatrixXd& img, int x, int y, int scale,
                       double lo, double hi) {
  if (scale < 1) scale = 1;
  const double span = hi - lo;
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      double v = span > 0.0 ? (img(r, c) - lo) / span : 0.5;
      if (!std::isfinite(v)) v = 0.0;
      v = std::clamp(v, 0.0, 1.0);
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * v));
      fill_rect(x + static_cast<int>(c) * scale, y + static_cast<int>(r) * scale,
                scale, scale, Rgb{g, g, g});
    }
  }
}

namespace {

void put_be32(std::uint8_t* b, std::uint32_t v) {
  b[0] = static_cast<std::uint8_t>(v >> 24);
  b[1] = static_cast<std::uint8_t>(v >> 16);
  b[2] = static_cast<std::uint8_t>(v >> 8);
  b[3] = static_cast<std::uint8_t>(v);
}

void write_chunk(std::ofstream& out, const char* type,
                 const std::uint8_t* data, std::size_t len) {
  std::uint8_t hdr[8];
  put_be32(hdr, static_cast<std::uint32_t>(len));
  std::copy(type, type + 4, hdr + 4);
  out.write(reinterpret_cast<const char*>(hdr), 8);
  if (len) out.write(reinterpret_cast<const char*>(data), std::streamsize(len));
  std::uint32_t crc =
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(type), 4);
  if (len) crc = crc32(crc, data, static_cast<uInt>(len));
  std::uint8_t tail[4];
  put_be32(tail, crc);
  out.write(reinterpret_cast<const char*>(tail), 4);
}

}  // namespace

void save_png(const Canvas& canvas, const std::filesystem::path& path) {
  const int w = canvas.width(), h = canvas.height();
  const auto& px = canvas.pixels();

  // Filter byte 0 in front of every scanline, then one deflate stream.
  std::vector<std::uint8_t> raw;
  raw.reserve(std::size_t(h) * (1 + 3 * std::size_t(w)));
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);
    const std::uint8_t* row = px.data() + std::size_t(y) * w * 3;
    raw.insert(raw.end(), row, row + std::size_t(w) * 3);
  }
  uLongf clen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(clen);
  if (compress2(comp.data(), &clen, raw.data(), static_cast<uLong>(raw.size()),
                9) != Z_OK)
    throw std::runtime_error("save_png: deflate failed");
  comp.resize(clen);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("save_png: cannot open " + path.string());
  static constexpr std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.write(reinterpret_cast<const char*>(sig), 8);

  std::uint8_t ihdr[13];
  put_be32(ihdr, static_cast<std::uint32_t>(w));
  put_be32(ihdr + 4, static_cast<std::uint32_t>(h));
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // truecolor
  ihdr[10] = 0;  // deflate
  ihdr[11] = 0;  // adaptive filtering
  ihdr[12] = 0;  // no interlace
  write_chunk(out, "IHDR", ihdr, sizeof ihdr);
  write_chunk(out, "IDAT", comp.data(), comp.size());
  write_chunk(out, "IEND", nullptr, 0);
  if (!out)
    throw std::runtime_error("save_png: write failed for " + path.string());
}

Canvas LinePlot::render(int width, int height) const {
  const Rgb black{0, 0, 0}, frame{90, 90, 90}, grid{225, 225, 225},
      ref{150, 150, 150};
  Canvas cv(width, height);

  const int px0 = 76, px1 = width - 17, py0 = 34, py1 = height - 47;
  if (px1 - px0 < 40 || py1 - py0 < 40)
    throw std::invalid_argument("LinePlot: canvas too small");

  // Data bounds in plot coordinates (x transformed when log-scaled).
  auto tx = [&](double x) { return log_x ? std::log10(x) : x; };
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size())
      throw std::invalid_argument("LinePlot: series length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (log_x && !(s.x[i] > 0.0)) continue;
      xlo = std::min(xlo, tx(s.x[i]));
      xhi = std::max(xhi, tx(s.x[i]));
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  }
  if (!std::isfinite(xlo) || !std::isfinite(ylo))
    throw std::invalid_argument("LinePlot: no finite data");
  if (xhi - xlo <= 0.0) {
    xlo -= std::max(1.0, std::fabs(xlo)) * 0.5;
    xhi += std::max(1.0, std::fabs(xhi)) * 0.5;
  }
  if (yhi - ylo <= 0.0) {
    ylo -= std::max(1.0, std::fabs(ylo)) * 0.5;
    yhi += std::max(1.0, std::fabs(yhi)) * 0.5;
  }
  const double xpad = (xhi - xlo) * 0.04, ypad = (yhi - ylo) * 0.05;
  xlo -= xpad;
  xhi += xpad;
  ylo -= ypad;
  yhi += ypad;

  auto sx = [&](double txv) {
    return px0 + static_cast<int>(std::lround((txv - xlo) / (xhi - xlo) *
                                              (px1 - px0)));
  };
  auto sy = [&](double y) {
    return py1 - static_cast<int>(std::lround((y - ylo) / (yhi - ylo) *
                                              (py1 - py0)));
  };

  // x ticks: decades plus unlabeled mantissa minors when log-scaled
  struct Tick {
    double pos;
    std::string label;
    bool minor;
  };
  std::vector<Tick> xticks;
  if (log_x) {
    const int elo = static_cast<int>(std::ceil(xlo - 1e-9));
    const int ehi = static_cast<int>(std::floor(xhi + 1e-9));
    for (int e = elo; e <= ehi; ++e)
      xticks.push_back({double(e), fmt_tick(std::pow(10.0, e)), false});
    for (int e = elo - 1; e <= ehi; ++e)
      for (int m = 2; m <= 9; ++m) {
        const double p = e + std::log10(double(m));
        if (p > xlo && p < xhi) xticks.push_back({p, "", true});
      }
    if (xticks.empty())
      for (double t : nice_ticks(xlo, xhi, 5))
        xticks.push_back({t, fmt_tick(std::pow(10.0, t)), false});
  } else {
    for (double t : nice_ticks(xlo, xhi, 6))
      xticks.push_back({t, fmt_tick(t), false});
  }
  const std::vector<double> yticks = nice_ticks(ylo, yhi, 5);

  for (const auto& t : xticks) {
    const int x = sx(t.pos);
    if (x < px0 || x > px1) continue;
    if (!t.minor) cv.line(x, py0, x, py1, grid);
    cv.line(x, py1 + 1, x, py1 + (t.minor ? 3 : 5), frame);
    if (!t.label.empty())
      cv.text(x - Canvas::text_width(t.label) / 2, py1 + 8, t.label, black);
  }
  for (double t : yticks) {
    const int y = sy(t);
    if (y < py0 || y > py1) continue;
    cv.line(px0, y, px1, y, grid);
    cv.line(px0 - 5, y, px0 - 1, y, frame);
    const std::string lab = fmt_tick(t);
    cv.text(px0 - 8 - Canvas::text_width(lab), y - 3, lab, black);
  }

  for (double v : vlines) {
    const double p = log_x ? (v > 0.0 ? std::log10(v) : xlo - 1.0) : v;
    if (p <= xlo || p >= xhi) continue;
    cv.line(sx(p), py0, sx(p), py1, ref, 3);
  }

  // frame on top of the grid
  cv.line(px0, py0, px1, py0, frame);
  cv.line(px0, py1, px1, py1, frame);
  cv.line(px0, py0, px0, py1, frame);
  cv.line(px1, py0, px1, py1, frame);

  for (const auto& s : series) {
    bool have_prev = false;
    int prx = 0, pry = 0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const bool ok = std::isfinite(s.x[i]) && std::isfinite(s.y[i]) &&
                      (!log_x || s.x[i] > 0.0);
      if (!ok) {
        have_prev = false;
        continue;
      }
      const int x = sx(tx(s.x[i])), y = sy(s.y[i]);
      if (have_prev) cv.line(prx, pry, x, y, s.color, s.dashed ? 4 : 0);
      cv.fill_rect(x - 1, y - 1, 3, 3, s.color);
      prx = x;
      pry = y;
      have_prev = true;
    }
  }

  bool any_label = false;
  for (const auto& s : series) any_label |= !s.label.empty();
  if (any_label) {
    int maxw = 0;
    int lines = 0;
    for (const auto& s : series)
      if (!s.label.empty()) {
        maxw = std::max(maxw, Canvas::text_width(s.label));
        ++lines;
      }
    const int bw = 18 + 6 + maxw + 12, bh = 12 * lines + 8;
    const int bx = px1 - bw - 6, by = py0 + 6;
    cv.fill_rect(bx, by, bw, bh, Rgb{255, 255, 255});
    cv.line(bx, by, bx + bw, by, frame);
    cv.line(bx, by + bh, bx + bw, by + bh, frame);
    cv.line(bx, by, bx, by + bh, frame);
    cv.line(bx + bw, by, bx + bw, by + bh, frame);
    int row = 0;
    for (const auto& s : series) {
      if (s.label.empty()) continue;
      const int cy = by + 6 + 12 * row + 3;
      cv.line(bx + 6, cy, bx + 6 + 18, cy, s.color, s.dashed ? 4 : 0);
      cv.text(bx + 6 + 18 + 6, cy - 3, s.label, black);
      ++row;
    }
  }

  if (!title.empty())
    cv.text((width - Canvas::text_width(title)) / 2, 12, title, black);
  if (!x_label.empty())
    cv.text((px0 + px1 - Canvas::text_width(x_label)) / 2, height - 16,
            x_label, black);
  if (!y_label.empty()) cv.text(8, 12, y_label, black);
  return cv;
}

void write_line_plot(const LinePlot& plot, const std::filesystem::path& path) {
  save_png(plot.render(), path);
}

}  // namespace disent
