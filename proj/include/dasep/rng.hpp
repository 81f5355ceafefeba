#pragma once

#include <cmath>
#include <cstdint>

namespace dasep {

// Counter-based splittable stream built on the splitmix64 mixer
// (Steele/Lea/Flood; Vigna's fixed-increment variant). Every trajectory
// gets its own stream derived from (master seed, stream index), so ensembles
// are reproducible independently of thread scheduling.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class RngStream {
  public:
    RngStream() : state_(0) {}
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    // Independent stream for trajectory `index` under `master`.
    static RngStream for_trajectory(std::uint64_t master, std::uint64_t index) {
        std::uint64_t k = mix64(master + 0x9e3779b97f4a7c15ULL * (index + 1));
        return RngStream(mix64(k ^ 0xd1b54a32d192ed03ULL));
    }

    std::uint64_t seed() const { return state0_set_ ? state0_ : state_; }

    std::uint64_t next_u64() {
        if (!state0_set_) { state0_ = state_; state0_set_ = true; }
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    // Uniform on (0,1]; never returns 0 so -log(u) is finite.
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Uniform on [0,1).
    double uniform01_halfopen() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double exponential(double rate) { return -std::log(uniform01()) / rate; }

    // Box-Muller, cached pair.
    double gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        double u2 = uniform01_halfopen();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  private:
    std::uint64_t state_;
    std::uint64_t state0_ = 0;
    bool state0_set_ = false;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace dasep
