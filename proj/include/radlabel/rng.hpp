#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace radlabel {

// Seeded RNG with a platform-independent output stream. std::mt19937 is fully
// specified by the standard; draws go through rejection sampling instead of
// std::uniform_int_distribution, whose mapping is implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed)
      : gen_(static_cast<std::mt19937::result_type>(seed)) {}

  // Uniform draw from [0, n). n must be > 0.
  std::size_t pick(std::size_t n) {
    const std::uint32_t bound = static_cast<std::uint32_t>(n);
    const std::uint32_t limit = std::mt19937::max() - std::mt19937::max() % bound;
    std::uint32_t draw;
    do {
      draw = gen_();
    } while (draw >= limit);
    return static_cast<std::size_t>(draw % bound);
  }

  // First n elements of a seeded partial Fisher-Yates pass, in draw order.
  std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n) {
    std::vector<std::size_t> idx(population);
    for (std::size_t i = 0; i < population; ++i) idx[i] = i;
    for (std::size_t i = 0; i < n && i < population; ++i) {
      std::swap(idx[i], idx[i + pick(population - i)]);
    }
    idx.resize(n);
    return idx;
  }

 private:
  std::mt19937 gen_;
};

}  // namespace radlabel
