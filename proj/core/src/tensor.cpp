#include "vmcnet/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace vmcnet {

std::size_t dtype_size(Dtype dt) {
    return dt == Dtype::f32 ? sizeof(float) : sizeof(double);
}

const char* dtype_name(Dtype dt) {
    return dt == Dtype::f32 ? "f32" : "f64";
}

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (std::int64_t d : s) {
        if (d < 0) throw std::invalid_argument("negative extent in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '{';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << '}';
    return os.str();
}

Tensor::Tensor() : shape_{0}, numel_(0) {}

Tensor::Tensor(Shape shape, Dtype dtype)
    : shape_(std::move(shape)), dtype_(dtype), numel_(shape_numel(shape_)) {
    data_.resize(static_cast<std::size_t>(numel_) * dtype_size(dtype_));
}

Tensor Tensor::zeros(Shape shape, Dtype dtype) { return Tensor(std::move(shape), dtype); }

Tensor Tensor::full(Shape shape, double value, Dtype dtype) {
    Tensor t(std::move(shape), dtype);
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, value);
    return t;
}

Tensor Tensor::scalar(double value, Dtype dtype) { return full({}, value, dtype); }

Tensor Tensor::from(const std::vector<double>& values, Shape shape, Dtype dtype) {
    Tensor t(std::move(shape), dtype);
    if (static_cast<std::int64_t>(values.size()) != t.numel())
        throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                    " does not fill shape " + shape_str(t.shape()));
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, values[static_cast<std::size_t>(i)]);
    return t;
}

double Tensor::get(std::int64_t i) const {
    return dtype_ == Dtype::f32 ? static_cast<double>(data<float>()[static_cast<std::size_t>(i)])
                                : data<double>()[static_cast<std::size_t>(i)];
}

void Tensor::set(std::int64_t i, double v) {
    if (dtype_ == Dtype::f32)
        data<float>()[static_cast<std::size_t>(i)] = static_cast<float>(v);
    else
        data<double>()[static_cast<std::size_t>(i)] = v;
}

Tensor Tensor::to(Dtype dt) const {
    if (dt == dtype_) return *this;
    Tensor out(shape_, dt);
    for (std::int64_t i = 0; i < numel_; ++i) out.set(i, get(i));
    return out;
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != numel_)
        throw std::invalid_argument("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                                    " changes element count");
    Tensor out = *this;
    out.shape_ = std::move(shape);
    return out;
}

bool Tensor::same_bytes(const Tensor& other) const {
    return dtype_ == other.dtype_ && shape_ == other.shape_ &&
           data_.size() == other.data_.size() &&
           std::memcmp(data_.data(), other.data_.data(), data_.size()) == 0;
}

bool Tensor::all_finite() const {
    for (std::int64_t i = 0; i < numel_; ++i)
        if (!std::isfinite(get(i))) return false;
    return true;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (std::int64_t i = 0; i < numel_; ++i) m = std::max(m, std::abs(get(i)));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("max_abs_diff shape mismatch: " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    double m = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.get(i) - b.get(i)));
    return m;
}

} // namespace vmcnet
