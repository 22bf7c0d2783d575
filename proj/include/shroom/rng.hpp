#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace shroom {

// mt19937_64 with hand-rolled bounded draws. The engine's output sequence is
// pinned by the standard; std::uniform_int_distribution and std::shuffle are
// not, so seeded runs would stop being reproducible across stdlibs.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // uniform in [0, n), rejection-sampled to avoid modulo bias
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;  // largest multiple of n
        std::uint64_t x = gen_();
        while (x >= limit) x = gen_();
        return x % n;
    }

    // uniform in [0, 1) with 53 random bits
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace shroom
