#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace effseg {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Non-deduced read-only vector view, so templates deduce Scalar from tensors only.
template <typename Scalar>
using VectorRef = std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>;

template <typename Scalar>
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dimensions of a rank-4 NCHW tensor.
struct Shape {
  Index n = 0;
  Index c = 0;
  Index h = 0;
  Index w = 0;

  Index size() const { return n * c * h * w; }
  Index plane() const { return h * w; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
    return os.str();
  }
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense NCHW tensor, row-major, templated on scalar so the same layer code
/// runs in float (training) and double (gradient checks).
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using PlaneMap = Eigen::Map<MatrixRM<Scalar>>;
  using ConstPlaneMap = Eigen::Map<const MatrixRM<Scalar>>;

  Tensor() = default;
  explicit Tensor(const Shape& shape) : shape_(check(shape)), data_(Vector<Scalar>::Zero(shape.size())) {}
  Tensor(Index n, Index c, Index h, Index w) : Tensor(Shape{n, c, h, w}) {}
  Tensor(const Shape& shape, Vector<Scalar> data) : shape_(check(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.size())
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match dims " + shape_.str());
  }

  /// Allocates without zero-filling; every element must be written before use.
  static Tensor uninitialized(const Shape& shape) {
    Tensor t;
    t.shape_ = check(shape);
    t.data_.resize(shape.size());
    return t;
  }

  static Tensor constant(const Shape& shape, Scalar value) {
    Tensor t(shape);
    t.data_.setConstant(value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Vector<Scalar>& data() { return data_; }
  const Vector<Scalar>& data() const { return data_; }

  Scalar& operator()(Index n, Index c, Index h, Index w) { return data_[offset(n, c, h, w)]; }
  Scalar operator()(Index n, Index c, Index h, Index w) const { return data_[offset(n, c, h, w)]; }

  /// One (sample, channel) plane as an H x W row-major matrix.
  PlaneMap plane(Index n, Index c) {
    return PlaneMap(data_.data() + offset(n, c, 0, 0), shape_.h, shape_.w);
  }
  ConstPlaneMap plane(Index n, Index c) const {
    return ConstPlaneMap(data_.data() + offset(n, c, 0, 0), shape_.h, shape_.w);
  }

  /// One sample as a C x (H*W) row-major matrix; this is exactly NCHW memory.
  PlaneMap sample(Index n) {
    return PlaneMap(data_.data() + offset(n, 0, 0, 0), shape_.c, shape_.plane());
  }
  ConstPlaneMap sample(Index n) const {
    return ConstPlaneMap(data_.data() + offset(n, 0, 0, 0), shape_.c, shape_.plane());
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  bool allFinite() const { return data_.allFinite(); }

 private:
  static const Shape& check(const Shape& s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) throw ShapeError("negative tensor dims " + s.str());
    return s;
  }
  Index offset(Index n, Index c, Index h, Index w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  Shape shape_;
  Vector<Scalar> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace effseg
