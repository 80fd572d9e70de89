#pragma once

#include <cstdint>
#include <random>

namespace lrcvar {

/// splitmix64 finalizer; used to derive independent stream seeds from (base, index).
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept
{
    return mix_seed(mix_seed(base) ^ mix_seed(index + 0x632BE59BD9B4E019ULL));
}

/// A single random stream. Owned by one trajectory; never shared between threads.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return uniform_(engine_); }
    double normal() { return normal_(engine_); }
    double chi_squared(double dof) { return 2.0 * std::gamma_distribution<double>(0.5 * dof, 1.0)(engine_); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace lrcvar
