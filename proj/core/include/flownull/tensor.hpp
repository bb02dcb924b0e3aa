#ifndef FLOWNULL_TENSOR_HPP
#define FLOWNULL_TENSOR_HPP

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace flownull {

enum class Dtype : std::uint8_t { Real32 = 0, Complex64 = 1 };

using cfloat = std::complex<float>;

/// Dense row-major tensor, single precision. Complex tensors store
/// interleaved (re, im) pairs; the element count is the product of dims.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<int> shape, Dtype dtype);

    static Tensor zeros(std::vector<int> shape, Dtype dtype = Dtype::Real32);
    static Tensor full(std::vector<int> shape, float value);
    static Tensor from_values(std::vector<int> shape, std::vector<float> values);

    const std::vector<int>& shape() const { return shape_; }
    Dtype dtype() const { return dtype_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    std::int64_t numel() const;
    bool is_complex() const { return dtype_ == Dtype::Complex64; }
    /// Number of stored floats (2x numel for complex).
    std::int64_t value_count() const { return static_cast<std::int64_t>(data_.size()); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }

    // std::complex<float> is layout-compatible with float[2].
    cfloat* cdata();
    const cfloat* cdata() const;

    float& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
    float operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

    /// Row-major flat index of (i0, i1, ...) in elements (not floats).
    std::int64_t index(std::span<const int> idx) const;
    float& at(std::initializer_list<int> idx);
    cfloat& cat(std::initializer_list<int> idx);

    bool same_shape(const Tensor& other) const {
        return shape_ == other.shape_ && dtype_ == other.dtype_;
    }
    bool all_finite() const;
    float max_abs() const;

    Tensor reshaped(std::vector<int> shape) const;

private:
    std::vector<int> shape_;
    Dtype dtype_ = Dtype::Real32;
    std::vector<float> data_;
};

std::string shape_str(const std::vector<int>& shape);

/// FNT1 binary tensor file: magic "FNT1", u8 dtype code, u8 rank,
/// u32 little-endian dims, then raw little-endian float32 payload
/// (interleaved re/im for complex). Used for checkpoints and datasets.
void save_fnt(const Tensor& t, const std::string& path);
Tensor load_fnt(const std::string& path);

/// 8-bit binary PGM preview of a (H,W) real image or the magnitude of a
/// complex one, scaled so the max maps to 255.
void save_pgm(const Tensor& image, const std::string& path);

} // namespace flownull

#endif
