#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace anyprot {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Error taxonomy, mapped to CLI exit codes: InputError (and subclasses) -> 1,
// NumericError -> 2.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : InputError {
    explicit DimensionError(const std::string& msg) : InputError(msg) {}
};

struct GeometryError : InputError {
    explicit GeometryError(const std::string& msg) : InputError(msg) {}
};

struct IoError : InputError {
    explicit IoError(const std::string& msg) : InputError(msg) {}
};

struct DataError : InputError {
    explicit DataError(const std::string& msg) : InputError(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// splitmix64: stateless hashing for reproducible, order-independent draws.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return splitmix64(a ^ (splitmix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Deterministic PRNG with a platform-independent normal sampler. std's
// distributions are implementation-defined, so draws are built by hand.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {}

    uint64_t next_u64() {
        state_ = splitmix64(state_ + 0x9e3779b97f4a7c15ULL);
        return state_;
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Box-Muller, no spare cached (keeps the stream position predictable).
    double gauss() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

  private:
    uint64_t state_;
};

}  // namespace anyprot
