#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>

namespace chase {

// All randomness in the project flows through explicitly seeded streams so
// that every result is a pure function of the master seed. Stream seeds are
// derived by hashing (master_seed, tag, indices...) rather than by drawing
// from a shared generator; this keeps parallel evaluation order-independent.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t t : tags) h = splitmix64(h ^ (t + 0x9e3779b97f4a7c15ULL));
  return h;
}

// Stream tags for seed derivation. Values are part of the reproducibility
// contract: changing them changes every derived stream.
enum class Stream : std::uint64_t {
  ChaserCma = 1,
  EscapeeCma = 2,
  ChaserFitness = 3,
  EscapeeFitness = 4,
  TrainTestSplit = 5,
  EscapeeDmin = 6,
  EscapeeInit = 7,
  Evaluation = 8,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0,
                                 std::uint64_t c = 0, std::uint64_t d = 0) {
  return mix_seed(master, {static_cast<std::uint64_t>(stream), a, b, c, d});
}

// Deterministic RNG with explicit distributions. std::normal_distribution is
// implementation-defined, so the Gaussian is a hand-rolled Box-Muller: the
// same seed gives the same stream on every platform/toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Uniform in (-pi, pi].
  double angle() { return M_PI - 2.0 * M_PI * u01(); }

  // Uniform integer in [0, n), n >= 1. Rejection-free 128-bit scaling.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(gen_()) * n) >> 64);
  }

  // Standard normal; draws a Box-Muller pair, second value discarded.
  double normal() {
    double u1 = 1.0 - u01();  // (0, 1]
    double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Fills n standard normals pairwise (no discarded draws inside the block).
  void fill_normal(double* out, std::size_t n) {
    std::size_t i = 0;
    while (i + 1 < n) {
      double u1 = 1.0 - u01();
      double u2 = u01();
      double r = std::sqrt(-2.0 * std::log(u1));
      out[i++] = r * std::cos(2.0 * M_PI * u2);
      out[i++] = r * std::sin(2.0 * M_PI * u2);
    }
    if (i < n) out[i] = normal();
  }

  // Engine state as text (standard-defined format), for checkpoints.
  std::string state_string() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }
  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
    if (is.fail()) throw std::invalid_argument("Rng: bad state string");
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace chase
