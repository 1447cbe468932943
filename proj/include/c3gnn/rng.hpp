#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace c3gnn {

// Seeded RNG wrapper with fixed sampling algorithms. std::*_distribution is
// implementation-defined, so all draws go through these helpers to keep
// outputs reproducible for a given seed.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, n)
    size_t uniform_index(size_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: empty range");
        // rejection sampling to avoid modulo bias
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<size_t>(x % n);
    }

    // uniform in [0, 1)
    double uniform_real() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // uniform in (-a, a)
    double uniform_symmetric(double a) { return (2.0 * uniform_real() - 1.0) * a; }

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0, n), order not meaningful
    std::vector<size_t> sample_without_replacement(size_t n, size_t k) {
        if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        for (size_t i = 0; i < k; ++i) {
            const size_t j = i + uniform_index(n - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

    // independent child stream, decorrelated by a splitmix step
    Rng fork(uint64_t stream) {
        uint64_t z = next_u64() + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 engine_;
};

} // namespace c3gnn
