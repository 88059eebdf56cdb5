#pragma once

#include "vmcnet/tensor.hpp"

#include <cstdint>
#include <string_view>

namespace vmcnet {

std::uint64_t fnv1a64(std::string_view s);

/// Counter-based deterministic RNG (splitmix64 over a seed/stream/counter
/// mix). Streams are derived from names so initialization does not depend on
/// registration order, and the i-th draw of a stream is the same on every
/// run and platform.
class Prng {
public:
    Prng(std::uint64_t seed, std::uint64_t stream);
    Prng(std::uint64_t seed, std::string_view stream_name);

    std::uint64_t next_u64();
    double uniform();                     // [0, 1)
    double uniform(double lo, double hi);
    double normal();                      // Box-Muller, two draws per value

    void fill_uniform(Tensor& t, double lo, double hi);
    void fill_normal(Tensor& t, double mean, double stddev);

private:
    std::uint64_t base_;
    std::uint64_t counter_ = 0;
};

} // namespace vmcnet
