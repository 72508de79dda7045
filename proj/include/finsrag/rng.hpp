#pragma once
// Deterministic randomness. Every random decision in the engine flows from
// one base seed through derive_seed(tag), and bounded draws / shuffles /
// gaussians are hand-rolled on top of mt19937_64 raw output, because
// std::uniform_int_distribution, std::shuffle and std::normal_distribution
// are implementation-defined and would break byte-identical artifacts.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace finsrag {

// FNV-1a over the tag, folded into the base seed and finalized splitmix-style
// so nearby (base, index) pairs land far apart.
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index = 0) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ull;
    }
    uint64_t x = base ^ h;
    x += 0x9e3779b97f4a7c15ull * (index + 1);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

class DetRng {
  public:
    explicit DetRng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Unbiased draw in [0, n) by rejection.
    uint64_t below(uint64_t n) {
        if (n == 0) throw std::invalid_argument("DetRng::below: n must be positive");
        uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            uint64_t r = eng_();
            if (r >= threshold) return r % n;
        }
    }

    // [0, 1) with 53 random bits.
    double unit() { return double(eng_() >> 11) * 0x1.0p-53; }

    // Box-Muller. 1 - u1 lies in (0, 1], so the log stays finite.
    double normal() {
        double u1 = unit();
        double u2 = unit();
        double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        return r * std::cos(6.28318530717958647692 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // First k positions of a Fisher-Yates pass: uniform sample w/o replacement.
    std::vector<size_t> sample_without_replacement(size_t n, size_t k) {
        if (k > n) k = n;
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        for (size_t i = 0; i < k; ++i) {
            size_t j = i + size_t(below(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

  private:
    std::mt19937_64 eng_;
};

}  // namespace finsrag
