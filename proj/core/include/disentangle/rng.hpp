#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace disent {

// 64-bit finalizer from the splitmix64 generator. Used to whiten seeds.
std::uint64_t mix64(std::uint64_t x);

// Derives an independent stream seed from (master seed, purpose tag).
// Identical inputs give identical streams on every platform.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t a, std::uint64_t b = 0);

// Deterministic random source. The generator is std::mt19937_64, whose output
// sequence is pinned by the standard, and normals come from the basic
// Box-Muller transform (two uniforms in, two normals out, no rejection), so a
// given seed consumes the same draws everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double normal();

  // Uniform integer in [0, n), n > 0. Multiply-shift reduction, no loop.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  Eigen::VectorXd normal_vector(int n);
  // Filled row by row so the draw order is part of the contract.
  Eigen::MatrixXd normal_matrix(int rows, int cols);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace disent
