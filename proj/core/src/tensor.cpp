#include "flownull/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "flownull/errors.hpp"

namespace flownull {

namespace {
std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        require(d > 0, "bad-shape", "tensor dims must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}
} // namespace

Tensor::Tensor(std::vector<int> shape, Dtype dtype) : shape_(std::move(shape)), dtype_(dtype) {
    std::int64_t n = shape_numel(shape_);
    data_.assign(static_cast<size_t>(dtype_ == Dtype::Complex64 ? 2 * n : n), 0.0f);
}

Tensor Tensor::zeros(std::vector<int> shape, Dtype dtype) { return Tensor(std::move(shape), dtype); }

Tensor Tensor::full(std::vector<int> shape, float value) {
    Tensor t(std::move(shape), Dtype::Real32);
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<float> values) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.dtype_ = Dtype::Real32;
    require(static_cast<std::int64_t>(values.size()) == shape_numel(t.shape_), "bad-shape",
            "value count does not match shape " + shape_str(t.shape_));
    t.data_ = std::move(values);
    return t;
}

std::int64_t Tensor::numel() const { return shape_numel(shape_); }

cfloat* Tensor::cdata() {
    require(is_complex(), "dtype-mismatch", "cdata() on a real tensor");
    return reinterpret_cast<cfloat*>(data_.data());
}

const cfloat* Tensor::cdata() const {
    require(is_complex(), "dtype-mismatch", "cdata() on a real tensor");
    return reinterpret_cast<const cfloat*>(data_.data());
}

std::int64_t Tensor::index(std::span<const int> idx) const {
    std::int64_t flat = 0;
    for (size_t i = 0; i < shape_.size(); ++i) flat = flat * shape_[i] + idx[i];
    return flat;
}

float& Tensor::at(std::initializer_list<int> idx) {
    std::vector<int> v(idx);
    return data_[static_cast<size_t>(index(v))];
}

cfloat& Tensor::cat(std::initializer_list<int> idx) {
    std::vector<int> v(idx);
    return cdata()[index(v)];
}

bool Tensor::all_finite() const {
    for (float v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

float Tensor::max_abs() const {
    float m = 0.0f;
    if (is_complex()) {
        const cfloat* c = cdata();
        for (std::int64_t i = 0; i < numel(); ++i) m = std::max(m, std::abs(c[i]));
    } else {
        for (float v : data_) m = std::max(m, std::fabs(v));
    }
    return m;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    require(shape_numel(shape) == numel(), "bad-shape",
            "reshape " + shape_str(shape_) + " -> " + shape_str(shape) + " changes element count");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void save_fnt(const Tensor& t, const std::string& path) {
    static_assert(std::endian::native == std::endian::little, "FNT1 writer assumes a little-endian host");
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "io-error", "cannot open " + path + " for writing");
    out.write("FNT1", 4);
    unsigned char dt = static_cast<unsigned char>(t.dtype());
    unsigned char rank = static_cast<unsigned char>(t.rank());
    out.write(reinterpret_cast<const char*>(&dt), 1);
    out.write(reinterpret_cast<const char*>(&rank), 1);
    for (int i = 0; i < t.rank(); ++i) put_u32(out, static_cast<std::uint32_t>(t.dim(i)));
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.value_count() * sizeof(float)));
    require(out.good(), "io-error", "write failed for " + path);
}

Tensor load_fnt(const std::string& path) {
    static_assert(std::endian::native == std::endian::little, "FNT1 reader assumes a little-endian host");
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io-error", "cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    require(in.good() && std::memcmp(magic, "FNT1", 4) == 0, "bad-format", path + " is not an FNT1 file");
    unsigned char dt = 0, rank = 0;
    in.read(reinterpret_cast<char*>(&dt), 1);
    in.read(reinterpret_cast<char*>(&rank), 1);
    require(dt <= 1, "bad-format", path + ": unknown dtype code " + std::to_string(dt));
    std::vector<int> shape(rank);
    for (int i = 0; i < rank; ++i) {
        std::uint32_t d = get_u32(in);
        require(d > 0 && d < (1u << 30), "bad-format", path + ": bad dim");
        shape[static_cast<size_t>(i)] = static_cast<int>(d);
    }
    Tensor t(shape, static_cast<Dtype>(dt));
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.value_count() * sizeof(float)));
    require(in.good(), "bad-format", path + ": truncated payload");
    return t;
}

void save_pgm(const Tensor& image, const std::string& path) {
    require(image.rank() == 2, "bad-shape", "PGM export expects a (H,W) image");
    const int h = image.dim(0), w = image.dim(1);
    std::vector<float> mag(static_cast<size_t>(h) * w);
    if (image.is_complex()) {
        const cfloat* c = image.cdata();
        for (size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(c[i]);
    } else {
        for (size_t i = 0; i < mag.size(); ++i) mag[i] = std::fabs(image[static_cast<std::int64_t>(i)]);
    }
    float m = *std::max_element(mag.begin(), mag.end());
    if (m <= 0.0f) m = 1.0f;
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "io-error", "cannot open " + path + " for writing");
    out << "P5\n" << w << " " << h << "\n255\n";
    for (float v : mag) {
        int q = static_cast<int>(std::lround(255.0f * v / m));
        unsigned char byte = static_cast<unsigned char>(std::clamp(q, 0, 255));
        out.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

} // namespace flownull
