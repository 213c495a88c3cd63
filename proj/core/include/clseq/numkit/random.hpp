#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace clseq::numkit {

/// Derives an independent stream seed from a base seed and a scope label.
/// Stable across platforms; used to give every language, split, and stage
/// its own reproducible stream.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view scope);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view scope, std::uint64_t index);

/// Deterministic generator (xoshiro256** seeded via splitmix64) with
/// hand-rolled distributions, so streams are bit-identical across standard
/// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform();                       // [0, 1), 53-bit resolution
    double uniform(double lo, double hi);   // [lo, hi)
    double normal(double mu = 0.0, double sigma = 1.0);  // Box-Muller, cached spare
    std::uint64_t below(std::uint64_t n);   // unbiased in [0, n)
    int uniform_int(int lo, int hi);        // inclusive bounds

    template <class T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Draws k distinct indices from [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::array<std::uint64_t, 4> state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace clseq::numkit
