#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace spai {

/// Seedable random source used everywhere reproducibility matters.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so the
/// transforms below are written out explicitly:
///  - uniform(): top 53 bits of one draw, scaled to [0, 1)
///  - normal(): Box-Muller on two uniforms, both outputs consumed in order
///  - below(n): rejection sampling on the full 64-bit range
/// Same seed gives the same stream on every conforming toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double log_uniform(double lo, double hi);
    double normal();
    std::uint64_t below(std::uint64_t n);

    std::vector<double> normal_vector(std::size_t n);
    void fill_normal(std::span<double> out);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Derives an independent stream seed from a base seed and a stream index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

} // namespace spai
