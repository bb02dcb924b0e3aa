#ifndef FLOWNULL_RNG_HPP
#define FLOWNULL_RNG_HPP

#include <cstdint>
#include <vector>

#include "flownull/tensor.hpp"

namespace flownull {

/// PCG32 (O'Neill). Self-contained so that streams are bit-reproducible
/// across platforms; std::<random> distributions are not.
class Pcg32 {
public:
    explicit Pcg32(std::uint64_t seed = 0x853c49e6748fea9bULL, std::uint64_t stream = 0xda3e39cb94b95bdbULL);

    std::uint32_t next_u32();
    /// Uniform in [0, 1) with 24 bits of mantissa.
    float next_float();
    double next_double();
    /// Uniform integer in [0, bound).
    std::uint32_t next_below(std::uint32_t bound);
    /// Standard normal via Box-Muller (one value per call, cached pair).
    float next_gaussian();

    std::uint64_t state() const { return state_; }
    std::uint64_t inc() const { return inc_; }
    void restore(std::uint64_t state, std::uint64_t inc);

private:
    std::uint64_t state_;
    std::uint64_t inc_;
    bool have_spare_ = false;
    float spare_ = 0.0f;
};

/// Derives an independent sub-stream, e.g. per sample index.
Pcg32 substream(std::uint64_t seed, std::uint64_t stream_id);

Tensor gaussian_tensor(Pcg32& rng, std::vector<int> shape);

/// Random n x n real orthogonal matrix (Householder QR of a Gaussian
/// matrix, R-diagonal sign-fixed). Deterministic per seed.
Tensor rand_orthogonal(int n, std::uint64_t seed);

} // namespace flownull

#endif
