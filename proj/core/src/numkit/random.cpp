#include "clseq/numkit/random.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "clseq/error.hpp"

namespace clseq::numkit {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::string_view scope) {
    std::uint64_t h = fnv1a(0xcbf29ce484222325ull ^ seed, scope);
    return splitmix64(h);
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view scope, std::uint64_t index) {
    std::uint64_t h = fnv1a(0xcbf29ce484222325ull ^ seed, scope) ^ (index * 0x9e3779b97f4a7c15ull);
    return splitmix64(h);
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = std::rotl(state_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal(double mu, double sigma) {
    if (has_spare_) {
        has_spare_ = false;
        return mu + sigma * spare_;
    }
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u = 1.0 - uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 2.0 * std::numbers::pi * v;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mu + sigma * r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
    check(n > 0, "rng: below(0)");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

int Rng::uniform_int(int lo, int hi) {
    check(lo <= hi, cat("rng: empty range [", lo, ", ", hi, "]"));
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
    check(k <= n, cat("rng: cannot draw ", k, " distinct items from ", n));
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = static_cast<std::size_t>(below(n - i));
        out.push_back(pool[j]);
        std::swap(pool[j], pool[n - i - 1]);
    }
    return out;
}

}  // namespace clseq::numkit
