#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hypermatch {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Rank-1 tensors of length n and rank-2 tensors of shape [1, n] are distinct
/// shapes; the graph ops treat a rank-2 tensor as a batch of row vectors and
/// a rank-1 tensor as one scalar per row.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  // First extent, and the product of the remaining extents.
  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const noexcept;

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& storage() noexcept { return values_; }
  const std::vector<double>& storage() const noexcept { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::span<double> row(std::size_t r) noexcept;
  std::span<const double> row(std::size_t r) const noexcept;

  // Same values, new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  void fill(double v);
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

}  // namespace hypermatch
