#pragma once
// FNV-1a 64-bit content hashing: manifest entries, params-file checksums,
// and prompt hashes for the synthetic forecaster's deterministic noise.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace finsrag {

class Fnv1a64 {
  public:
    void update(const void* data, size_t n) {
        auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 1099511628211ull;
        }
    }
    void update(std::string_view s) { update(s.data(), s.size()); }
    uint64_t digest() const { return h_; }

  private:
    uint64_t h_ = 14695981039346656037ull;
};

inline uint64_t fnv1a64(std::string_view s) {
    Fnv1a64 h;
    h.update(s);
    return h.digest();
}

inline uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for hashing: " + path);
    Fnv1a64 h;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) h.update(buf, size_t(in.gcount()));
    return h.digest();
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace finsrag
