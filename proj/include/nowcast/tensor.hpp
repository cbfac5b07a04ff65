#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "nowcast/common.hpp"

namespace nowcast {

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct TensorStorage {
    Shape shape;
    ArrayX<Scalar> values;
    ArrayX<Scalar> grad;  // empty until first accumulation
    bool requires_grad = false;

    bool has_grad() const { return grad.size() > 0; }
    void ensure_grad() {
        if (!has_grad()) grad = ArrayX<Scalar>::Zero(values.size());
    }
};

// Dense row-major tensor, 1-4 dimensions, shared-buffer value handle.
// Values are treated as immutable once an op has consumed them; gradients
// accumulate in place.
template <typename Scalar>
class Tensor {
public:
    using Storage = TensorStorage<Scalar>;

    Tensor() = default;

    static Tensor zeros(const Shape& shape) {
        Tensor t(shape);
        t.values().setZero();
        return t;
    }
    static Tensor full(const Shape& shape, Scalar v) {
        Tensor t(shape);
        t.values().setConstant(v);
        return t;
    }
    static Tensor uninit(const Shape& shape) { return Tensor(shape); }
    static Tensor from(const Shape& shape, const std::vector<Scalar>& data) {
        Tensor t(shape);
        check_dim(static_cast<std::int64_t>(data.size()) == shape.numel(),
                  "tensor data length " + std::to_string(data.size()) +
                      " does not match shape " + shape.str());
        for (std::size_t i = 0; i < data.size(); ++i) t.values()(static_cast<Eigen::Index>(i)) = data[i];
        return t;
    }
    static Tensor scalar(Scalar v) { return full({1}, v); }

    bool defined() const { return static_cast<bool>(s_); }
    const Shape& shape() const { return s_->shape; }
    int ndim() const { return s_->shape.ndim(); }
    std::int64_t dim(int i) const { return s_->shape[i]; }
    std::int64_t numel() const { return s_->values.size(); }

    ArrayX<Scalar>& values() { return s_->values; }
    const ArrayX<Scalar>& values() const { return s_->values; }
    Scalar* data() { return s_->values.data(); }
    const Scalar* data() const { return s_->values.data(); }

    Scalar operator[](std::int64_t i) const { return s_->values(i); }

    // flat index for a (b, c, h, w) element of a 4-D tensor
    std::int64_t offset(std::int64_t b, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return ((b * dim(1) + c) * dim(2) + h) * dim(3) + w;
    }
    Scalar at(std::int64_t b, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return s_->values(offset(b, c, h, w));
    }

    bool requires_grad() const { return s_ && s_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        s_->requires_grad = v;
        return *this;
    }

    bool has_grad() const { return s_ && s_->has_grad(); }
    ArrayX<Scalar>& grad() {
        s_->ensure_grad();
        return s_->grad;
    }
    const ArrayX<Scalar>& grad() const { return s_->grad; }
    void zero_grad() {
        if (s_ && s_->has_grad()) s_->grad.setZero();
    }

    std::shared_ptr<Storage> storage() const { return s_; }

    // deep copy; drops graph identity and gradient
    Tensor clone() const {
        Tensor t(s_->shape);
        t.values() = s_->values;
        return t;
    }

    template <typename T>
    Tensor<T> cast() const {
        Tensor<T> t = Tensor<T>::uninit(s_->shape);
        t.values() = s_->values.template cast<T>();
        return t;
    }

    bool all_finite() const { return s_->values.isFinite().all(); }

private:
    explicit Tensor(const Shape& shape) : s_(std::make_shared<Storage>()) {
        s_->shape = shape;
        s_->values.resize(shape.numel());
    }

    std::shared_ptr<Storage> s_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace nowcast
