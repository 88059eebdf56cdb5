#include "vmcnet/rng.hpp"

#include <cmath>
#include <numbers>

namespace vmcnet {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

Prng::Prng(std::uint64_t seed, std::uint64_t stream)
    : base_(splitmix64(seed) ^ splitmix64(stream ^ 0xa5a5a5a5a5a5a5a5ull)) {}

Prng::Prng(std::uint64_t seed, std::string_view stream_name)
    : Prng(seed, fnv1a64(stream_name)) {}

std::uint64_t Prng::next_u64() { return splitmix64(base_ + counter_++); }

double Prng::uniform() {
    // 53 mantissa bits -> [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Prng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Prng::normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void Prng::fill_uniform(Tensor& t, double lo, double hi) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, uniform(lo, hi));
}

void Prng::fill_normal(Tensor& t, double mean, double stddev) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, mean + stddev * normal());
}

} // namespace vmcnet
