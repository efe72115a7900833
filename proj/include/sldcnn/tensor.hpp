#ifndef SLDCNN_TENSOR_HPP
#define SLDCNN_TENSOR_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sldcnn/rng.hpp"

namespace sldcnn {

using Real = double;
using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array, last axis fastest. Shapes never broadcast.
///
/// A default-constructed tensor is the empty placeholder (rank 0, no data);
/// every other tensor has all extents >= 1.
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor. Throws ShapeError on an empty shape or zero extent.
  explicit Tensor(Shape shape);

  /// Takes ownership of `data`; its length must equal the shape product.
  Tensor(Shape shape, std::vector<Real> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<Real> values() noexcept { return data_; }
  std::span<const Real> values() const noexcept { return data_; }
  Real* data() noexcept { return data_.data(); }
  const Real* data() const noexcept { return data_.data(); }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  /// Same data, new shape of equal element count.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  void fill(Real value);
  bool all_finite() const noexcept;

  /// Copies rows [begin, end) along axis 0.
  Tensor slice_rows(std::size_t begin, std::size_t end) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<Real> data_;
};

Tensor zeros(const Shape& shape);
Tensor identity(std::size_t n);

/// I.i.d. uniform on [lo, hi). Throws RangeError unless lo < hi.
Tensor random_uniform(const Shape& shape, Real lo, Real hi, Rng& rng);

// Elementwise arithmetic. Binary forms require identical shapes
// (ShapeError otherwise); every result is checked for non-finite values
// (NumericError).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real factor);
Tensor square(const Tensor& a);
/// DomainError on any negative element.
Tensor sqrt(const Tensor& a);

/// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

Real sum(const Tensor& a);
Real max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace sldcnn

#endif  // SLDCNN_TENSOR_HPP
