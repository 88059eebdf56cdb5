#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vmcnet {

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

std::size_t dtype_size(Dtype dt);
const char* dtype_name(Dtype dt);

// Row-major dense shape; rank 0 (empty shape) is a scalar.
using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Dense row-major tensor of f32 or f64 values. The universal value type:
/// images are {N,H,W,C}, token maps are {N,T,C}, weights follow the op that
/// owns them.
class Tensor {
public:
    Tensor();
    Tensor(Shape shape, Dtype dtype);

    static Tensor zeros(Shape shape, Dtype dtype = Dtype::f64);
    static Tensor full(Shape shape, double value, Dtype dtype = Dtype::f64);
    static Tensor scalar(double value, Dtype dtype = Dtype::f64);
    static Tensor from(const std::vector<double>& values, Shape shape,
                       Dtype dtype = Dtype::f64);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::int64_t dim(std::size_t i) const { return shape_[i]; }
    std::int64_t numel() const { return numel_; }
    Dtype dtype() const { return dtype_; }

    template <class T> std::span<T> data();
    template <class T> std::span<const T> data() const;

    std::span<const std::byte> bytes() const { return {data_.data(), data_.size()}; }
    std::span<std::byte> bytes() { return {data_.data(), data_.size()}; }

    // Dtype-dispatched flat element access; convenient but not for hot loops.
    double get(std::int64_t i) const;
    void set(std::int64_t i, double v);

    Tensor to(Dtype dt) const;
    Tensor clone() const { return *this; }
    Tensor reshaped(Shape shape) const;

    bool same_bytes(const Tensor& other) const;
    bool all_finite() const;
    double max_abs() const;

private:
    Shape shape_;
    Dtype dtype_ = Dtype::f64;
    std::int64_t numel_ = 0;
    std::vector<std::byte> data_;
};

template <class T> std::span<T> Tensor::data() {
    return {reinterpret_cast<T*>(data_.data()), static_cast<std::size_t>(numel_)};
}
template <class T> std::span<const T> Tensor::data() const {
    return {reinterpret_cast<const T*>(data_.data()), static_cast<std::size_t>(numel_)};
}

double max_abs_diff(const Tensor& a, const Tensor& b);

} // namespace vmcnet
