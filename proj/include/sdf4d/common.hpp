#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace sdf4d {

/// Deterministic random source. Wraps std::mt19937_64 but converts raw draws
/// to doubles directly, so sequences are identical across standard library
/// implementations (std::uniform_real_distribution output is not portable).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
        // rejection sampling to avoid modulo bias
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t draw;
        do {
            draw = engine_();
        } while (draw >= limit);
        return draw % n;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Derive an independent stream seed from a base seed (splitmix64 step).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Number of work stripes used by deterministic parallel reductions. Results
/// are combined in stripe order, so they do not depend on the thread count.
inline constexpr int kReductionStripes = 8;

/// Run fn(stripe, begin, end) over a fixed partition of [0, n) into
/// kReductionStripes contiguous stripes. Stripes may execute on different
/// threads; the partition itself never depends on the machine.
void parallel_stripes(std::size_t n, const std::function<void(int, std::size_t, std::size_t)>& fn);

}  // namespace sdf4d
