#include "flownull/rng.hpp"

#include <cmath>

#include "flownull/errors.hpp"

namespace flownull {

Pcg32::Pcg32(std::uint64_t seed, std::uint64_t stream) : state_(0), inc_((stream << 1) | 1u) {
    next_u32();
    state_ += seed;
    next_u32();
}

std::uint32_t Pcg32::next_u32() {
    std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

float Pcg32::next_float() { return static_cast<float>(next_u32() >> 8) * 0x1.0p-24f; }

double Pcg32::next_double() {
    std::uint64_t hi = next_u32();
    std::uint64_t lo = next_u32();
    return static_cast<double>((hi << 21) ^ lo) * 0x1.0p-53;
}

std::uint32_t Pcg32::next_below(std::uint32_t bound) {
    // Lemire-style rejection to avoid modulo bias.
    std::uint32_t threshold = (0u - bound) % bound;
    for (;;) {
        std::uint32_t r = next_u32();
        if (r >= threshold) return r % bound;
    }
}

float Pcg32::next_gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    float u1 = 0.0f, u2 = 0.0f;
    do {
        u1 = next_float();
    } while (u1 <= 1e-12f);
    u2 = next_float();
    float r = std::sqrt(-2.0f * std::log(u1));
    float a = 6.28318530717958647692f * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

void Pcg32::restore(std::uint64_t state, std::uint64_t inc) {
    state_ = state;
    inc_ = inc;
    have_spare_ = false;
}

Pcg32 substream(std::uint64_t seed, std::uint64_t stream_id) {
    return Pcg32(seed ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1)), 0x5851f42d4c957f2dULL + stream_id);
}

Tensor gaussian_tensor(Pcg32& rng, std::vector<int> shape) {
    Tensor t(std::move(shape), Dtype::Real32);
    for (std::int64_t i = 0; i < t.value_count(); ++i) t[i] = rng.next_gaussian();
    return t;
}

Tensor rand_orthogonal(int n, std::uint64_t seed) {
    require(n >= 1, "bad-shape", "rand_orthogonal needs n >= 1");
    Pcg32 rng = substream(seed, 0xfeedULL);
    // Double-precision QR keeps Q'Q - I well below the 1e-5 contract.
    std::vector<double> a(static_cast<size_t>(n) * n);
    for (auto& v : a) v = rng.next_gaussian();
    std::vector<double> q(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) q[static_cast<size_t>(i) * n + i] = 1.0;

    // Householder QR; accumulate Q explicitly.
    for (int k = 0; k < n; ++k) {
        double norm = 0.0;
        for (int i = k; i < n; ++i) norm += a[static_cast<size_t>(i) * n + k] * a[static_cast<size_t>(i) * n + k];
        norm = std::sqrt(norm);
        if (norm < 1e-300) continue;
        double akk = a[static_cast<size_t>(k) * n + k];
        double alpha = akk >= 0 ? -norm : norm;
        std::vector<double> v(static_cast<size_t>(n), 0.0);
        v[static_cast<size_t>(k)] = akk - alpha;
        for (int i = k + 1; i < n; ++i) v[static_cast<size_t>(i)] = a[static_cast<size_t>(i) * n + k];
        double vtv = 0.0;
        for (int i = k; i < n; ++i) vtv += v[static_cast<size_t>(i)] * v[static_cast<size_t>(i)];
        if (vtv < 1e-300) continue;
        // A <- (I - 2 v v^T / v^T v) A ; Q <- Q (I - 2 v v^T / v^T v)
        for (int j = k; j < n; ++j) {
            double dot = 0.0;
            for (int i = k; i < n; ++i) dot += v[static_cast<size_t>(i)] * a[static_cast<size_t>(i) * n + j];
            double c = 2.0 * dot / vtv;
            for (int i = k; i < n; ++i) a[static_cast<size_t>(i) * n + j] -= c * v[static_cast<size_t>(i)];
        }
        for (int i = 0; i < n; ++i) {
            double dot = 0.0;
            for (int j = k; j < n; ++j) dot += q[static_cast<size_t>(i) * n + j] * v[static_cast<size_t>(j)];
            double c = 2.0 * dot / vtv;
            for (int j = k; j < n; ++j) q[static_cast<size_t>(i) * n + j] -= c * v[static_cast<size_t>(j)];
        }
    }
    // Fix signs so the factorization is unique (R diagonal positive).
    for (int j = 0; j < n; ++j) {
        if (a[static_cast<size_t>(j) * n + j] < 0.0)
            for (int i = 0; i < n; ++i) q[static_cast<size_t>(i) * n + j] = -q[static_cast<size_t>(i) * n + j];
    }
    Tensor out({n, n}, Dtype::Real32);
    for (std::int64_t i = 0; i < out.value_count(); ++i) out[i] = static_cast<float>(q[static_cast<size_t>(i)]);
    return out;
}

} // namespace flownull
