#include "disentangle/data_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include "disentangle/rng.hpp"
#include "disentangle/textio.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace disent {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803u;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801u;

std::uint32_t read_be32(const unsigned char* b) {
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::string read_file_bytes(const std::filesystem::path& path,
                            const char* who) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error(std::string(who) + ": cannot open " +
                             path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad())
    throw std::runtime_error(std::string(who) + ": read failed for " +
                             path.string());
  return bytes;
}

}  // namespace

IdxImages load_idx_images(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path, "load_idx_images");
  if (bytes.size() < 16)
    throw std::runtime_error("load_idx_images: truncated header in " +
                             path.string());
  const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t magic = read_be32(b);
  if (magic == kIdxLabelMagic)
    throw std::runtime_error("load_idx_images: " + path.string() +
                             " is an IDX label file, expected an image file");
  if (magic != kIdxImageMagic)
    throw std::runtime_error("load_idx_images: bad magic in " + path.string());

  IdxImages imgs;
  imgs.count = read_be32(b + 4);
  imgs.rows = read_be32(b + 8);
  imgs.cols = read_be32(b + 12);
  const std::uint64_t per = std::uint64_t(imgs.rows) * imgs.cols;
  const std::uint64_t total = per * imgs.count;
  if (per != 0 && total / per != imgs.count)
    throw std::runtime_error("load_idx_images: dimension overflow in " +
                             path.string());
  if (bytes.size() - 16 != total)
    throw std::runtime_error(
        "load_idx_images: " + path.string() + ": expected " +
        std::to_string(total) + " pixel bytes, found " +
        std::to_string(bytes.size() - 16));
  imgs.pixels.assign(b + 16, b + 16 + total);
  return imgs;
}

void save_idx_images(const IdxImages& imgs, const std::filesystem::path& path) {
  const std::uint64_t total =
      std::uint64_t(imgs.rows) * imgs.cols * imgs.count;
  if (imgs.pixels.size() != total)
    throw std::invalid_argument(
        "save_idx_images: pixel buffer does not match header dimensions");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("save_idx_images: cannot open " + path.string());
  write_be32(out, kIdxImageMagic);
  write_be32(out, imgs.count);
  write_be32(out, imgs.rows);
  write_be32(out, imgs.cols);
  out.write(reinterpret_cast<const char*>(imgs.pixels.data()),
            static_cast<std::streamsize>(imgs.pixels.size()));
  if (!out)
    throw std::runtime_error("save_idx_images: write failed for " +
                             path.string());
}

namespace {

// Seven-segment layout inside 28x28, jittered by (dx, dy) and stroke t.
//   A = top bar, G = middle, D = bottom; F/B upper verticals, E/C lower.
void draw_glyph(std::uint8_t* img, int digit, int dx, int dy, int t) {
  static constexpr bool kSeg[10][7] = {
      // A  B  C  D  E  F  G
      {1, 1, 1, 1, 1, 1, 0},  // 0
      {0, 1, 1, 0, 0, 0, 0},  // 1
      {1, 1, 0, 1, 1, 0, 1},  // 2
      {1, 1, 1, 1, 0, 0, 1},  // 3
      {0, 1, 1, 0, 0, 1, 1},  // 4
      {1, 0, 1, 1, 0, 1, 1},  // 5
      {1, 0, 1, 1, 1, 1, 1},  // 6
      {1, 1, 1, 0, 0, 0, 0},  // 7
      {1, 1, 1, 1, 1, 1, 1},  // 8
      {1, 1, 1, 1, 0, 1, 1},  // 9
  };
  const int x0 = 8 + dx, x1 = 19 + dx;
  const int y0 = 4 + dy, ym = 12 + dy, y1 = 21 + dy;
  auto hbar = [&](int y) {
    for (int r = y; r < y + t; ++r)
      for (int c = x0; c <= x1; ++c) img[r * 28 + c] = 255;
  };
  auto vbar = [&](int x, int ya, int yb) {
    for (int r = ya; r < yb + t; ++r)
      for (int c = x; c < x + t; ++c) img[r * 28 + c] = 255;
  };
  const bool* seg = kSeg[digit];
  if (seg[0]) hbar(y0);
  if (seg[6]) hbar(ym);
  if (seg[3]) hbar(y1);
  if (seg[5]) vbar(x0, y0, ym);           // F
  if (seg[1]) vbar(x1 - t + 1, y0, ym);   // B
  if (seg[4]) vbar(x0, ym, y1);           // E
  if (seg[2]) vbar(x1 - t + 1, ym, y1);   // C
}

}  // namespace

IdxImages synthetic_digits() {
  IdxImages imgs;
  imgs.count = 64;
  imgs.rows = 28;
  imgs.cols = 28;
  imgs.pixels.assign(std::size_t(64) * 28 * 28, 0);
  for (std::uint32_t i = 0; i < imgs.count; ++i) {
    Rng rng(derive_seed(0x64d1617u, "synthetic-digits", i));
    const int dx = static_cast<int>(rng.below(5)) - 2;
    const int dy = static_cast<int>(rng.below(5)) - 2;
    const int t = 2 + static_cast<int>(rng.below(2));
    draw_glyph(imgs.pixels.data() + std::size_t(i) * 28 * 28,
               static_cast<int>(i % 10), dx, dy, t);
  }
  return imgs;
}

MixingModel localization_mixing() {
  Eigen::Matrix2d a;
  a << 2.73, 0.73, 0.73, 2.73;
  return MixingModel(a);
}

int paste_offset(double p) {
  const double r = std::round(6.0 + p);
  if (!(r > 0.0)) return 0;  // also catches NaN
  if (r > 12.0) return 12;
  return static_cast<int>(r);
}

CanvasDataset make_localization_dataset(const IdxImages& digits, int n,
                                        std::uint64_t seed) {
  if (digits.rows != 28 || digits.cols != 28)
    throw std::invalid_argument(
        "make_localization_dataset: digit images must be 28x28");
  if (digits.count == 0)
    throw std::invalid_argument("make_localization_dataset: empty digit set");
  if (n < 1)
    throw std::invalid_argument("make_localization_dataset: n must be >= 1");

  CanvasDataset ds;
  ds.mixing = localization_mixing();
  const Eigen::Matrix2d a = ds.mixing.mixing;
  ds.images.setZero(n, 1600);
  ds.sources.resize(n, 2);
  ds.positions.resize(n, 2);
  ds.offsets.resize(n, 2);
  ds.digit_index.resize(static_cast<std::size_t>(n));

  // One derived stream per example, so examples are order-independent.
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, "canvas-example", static_cast<std::uint64_t>(i)));
    const Eigen::Vector2d s(rng.normal(), rng.normal());
    const Eigen::Vector2d eta(rng.normal(), rng.normal());
    const Eigen::Vector2d p = a * s + eta;
    ds.sources.row(i) = s.transpose();
    ds.positions.row(i) = p.transpose();
    const int ox = paste_offset(p[0]);
    const int oy = paste_offset(p[1]);
    ds.offsets(i, 0) = ox;
    ds.offsets(i, 1) = oy;
    const std::uint32_t d = static_cast<std::uint32_t>(rng.below(digits.count));
    ds.digit_index[static_cast<std::size_t>(i)] = d;
    const std::uint8_t* img = digits.image(d);
    for (int r = 0; r < 28; ++r)
      for (int c = 0; c < 28; ++c)
        ds.images(i, (oy + r) * 40 + (ox + c)) = double(img[r * 28 + c]);
  }
  return ds;
}

Standardized standardize(const Eigen::MatrixXd& data) {
  if (data.size() == 0)
    throw std::invalid_argument("standardize: empty matrix");
  Standardized out;
  out.mean = data.mean();
  const double var = (data.array() - out.mean).square().sum() /
                     static_cast<double>(data.size());
  const double sd = std::sqrt(var);
  if (sd < 1e-12) {
    out.data = Eigen::MatrixXd::Zero(data.rows(), data.cols());
    out.std_dev = 1.0;
  } else {
    out.std_dev = sd;
    out.data = (data.array() - out.mean) / sd;
  }
  return out;
}

void save_canvas_dataset(const CanvasDataset& ds,
                         const std::filesystem::path& dir) {
  const Eigen::Index n = ds.sources.rows();
  if (ds.images.rows() != n || ds.positions.rows() != n ||
      ds.offsets.rows() != n ||
      ds.digit_index.size() != static_cast<std::size_t>(n) ||
      ds.images.cols() != 1600)
    throw std::invalid_argument("save_canvas_dataset: inconsistent dataset");

  std::filesystem::create_directories(dir);

  std::ofstream csv(dir / "dataset.csv", std::ios::binary | std::ios::trunc);
  if (!csv)
    throw std::runtime_error("save_canvas_dataset: cannot open " +
                             (dir / "dataset.csv").string());
  csv << "s0,s1,p0,p1,ox,oy,digit\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    csv << fmt_g17(ds.sources(i, 0)) << ',' << fmt_g17(ds.sources(i, 1)) << ','
        << fmt_g17(ds.positions(i, 0)) << ',' << fmt_g17(ds.positions(i, 1))
        << ',' << ds.offsets(i, 0) << ',' << ds.offsets(i, 1) << ','
        << ds.digit_index[static_cast<std::size_t>(i)] << '\n';
  }
  if (!csv)
    throw std::runtime_error("save_canvas_dataset: write failed for " +
                             (dir / "dataset.csv").string());

  std::ofstream bin(dir / "images.bin", std::ios::binary | std::ios::trunc);
  if (!bin)
    throw std::runtime_error("save_canvas_dataset: cannot open " +
                             (dir / "images.bin").string());
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      rowmajor = ds.images;
  bin.write(reinterpret_cast<const char*>(rowmajor.data()),
            static_cast<std::streamsize>(sizeof(double) * rowmajor.size()));
  if (!bin)
    throw std::runtime_error("save_canvas_dataset: write failed for " +
                             (dir / "images.bin").string());
}

CanvasDataset load_canvas_dataset(const std::filesystem::path& dir) {
  std::ifstream csv(dir / "dataset.csv", std::ios::binary);
  if (!csv)
    throw std::runtime_error("load_canvas_dataset: cannot open " +
                             (dir / "dataset.csv").string());
  std::string line;
  if (!std::getline(csv, line) ||
      trim(line) != "s0,s1,p0,p1,ox,oy,digit")
    throw std::runtime_error("load_canvas_dataset: bad header in " +
                             (dir / "dataset.csv").string());
  std::vector<double> s0, s1, p0, p1;
  std::vector<int> ox, oy;
  std::vector<std::uint32_t> digit;
  while (std::getline(csv, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 7)
      throw std::runtime_error("load_canvas_dataset: bad row: " + line);
    s0.push_back(parse_double(f[0]));
    s1.push_back(parse_double(f[1]));
    p0.push_back(parse_double(f[2]));
    p1.push_back(parse_double(f[3]));
    ox.push_back(static_cast<int>(parse_int(f[4])));
    oy.push_back(static_cast<int>(parse_int(f[5])));
    digit.push_back(static_cast<std::uint32_t>(parse_uint(f[6])));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(s0.size());
  if (n == 0)
    throw std::runtime_error("load_canvas_dataset: no rows in " +
                             (dir / "dataset.csv").string());

  CanvasDataset ds;
  ds.mixing = localization_mixing();
  ds.sources.resize(n, 2);
  ds.positions.resize(n, 2);
  ds.offsets.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    ds.sources(i, 0) = s0[u];
    ds.sources(i, 1) = s1[u];
    ds.positions(i, 0) = p0[u];
    ds.positions(i, 1) = p1[u];
    ds.offsets(i, 0) = ox[u];
    ds.offsets(i, 1) = oy[u];
  }
  ds.digit_index = std::move(digit);

  const std::string bytes =
      read_file_bytes(dir / "images.bin", "load_canvas_dataset");
  const std::size_t expect = sizeof(double) * std::size_t(n) * 1600;
  if (bytes.size() != expect)
    throw std::runtime_error(
        "load_canvas_dataset: " + (dir / "images.bin").string() +
        ": expected " + std::to_string(expect) + " bytes, found " +
        std::to_string(bytes.size()));
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      rowmajor(n, 1600);
  std::memcpy(rowmajor.data(), bytes.data(), expect);
  ds.images = rowmajor;
  return ds;
}

}  // namespace disent
