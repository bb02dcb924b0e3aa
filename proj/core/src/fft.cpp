#include "flownull/fft.hpp"

#include <cmath>
#include <vector>

#include "flownull/errors.hpp"

namespace flownull {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

// In-place iterative radix-2 Cooley-Tukey on a strided line.
// sign = -1: forward DFT kernel, +1: inverse. No normalization here.
void fft_line(cfloat* data, int n, std::int64_t stride, int sign) {
    // Bit-reversal permutation.
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i * stride], data[j * stride]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * M_PI / len;
        const cfloat wlen(static_cast<float>(std::cos(ang)), static_cast<float>(std::sin(ang)));
        for (int i = 0; i < n; i += len) {
            cfloat w(1.0f, 0.0f);
            for (int k = 0; k < len / 2; ++k) {
                cfloat a = data[(i + k) * stride];
                cfloat b = data[(i + k + len / 2) * stride] * w;
                data[(i + k) * stride] = a + b;
                data[(i + k + len / 2) * stride] = a - b;
                w *= wlen;
            }
        }
    }
}

Tensor fft2_impl(const Tensor& image, int sign) {
    require(image.rank() == 2 && image.is_complex(), "bad-shape", "fft2 expects a (H,W) complex image");
    const int h = image.dim(0), w = image.dim(1);
    require(is_power_of_two(h) && is_power_of_two(w), "unsupported-size",
            "fft2 supports power-of-two dims only, got " + shape_str(image.shape()));
    require(image.all_finite(), "poisoned-value", "fft2 input contains NaN/Inf");
    Tensor out = image;
    cfloat* d = out.cdata();
    for (int r = 0; r < h; ++r) fft_line(d + static_cast<std::int64_t>(r) * w, w, 1, sign);
    for (int c = 0; c < w; ++c) fft_line(d + c, h, w, sign);
    const float scale = 1.0f / std::sqrt(static_cast<float>(h) * static_cast<float>(w));
    for (std::int64_t i = 0; i < out.value_count(); ++i) out[i] *= scale;
    return out;
}

} // namespace

Tensor fft2(const Tensor& image) { return fft2_impl(image, -1); }
Tensor ifft2(const Tensor& image) { return fft2_impl(image, +1); }

} // namespace flownull
