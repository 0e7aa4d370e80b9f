#pragma once

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace catlab {

// std engines are fully specified by the standard; the distributions come from
// Boost because the std ones are implementation-defined.
using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based stream derivation: the seed for work item `index` of stream
// `stream` depends only on (base, stream, index), never on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(base ^ splitmix64(stream + 0x632be59bd9b4e019ULL)) + index);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform01() { return boost::random::uniform_01<double>()(engine_); }
  // Inclusive range.
  long uniform_int(long lo, long hi) {
    return boost::random::uniform_int_distribution<long>(lo, hi)(engine_);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (long i = static_cast<long>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(uniform_int(0, i))]);
    }
  }

  Engine& engine() noexcept { return engine_; }

 private:
  Engine engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace catlab
