#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rgnn/errors.hpp"
#include "rgnn/rng.hpp"

namespace rgnn {

class Tape;

namespace debug {

// When enabled, every forward op validates its output for NaN/Inf.
// On by default in debug builds.
inline bool& check_finite_flag() {
#ifdef NDEBUG
  static bool flag = false;
#else
  static bool flag = true;
#endif
  return flag;
}

inline void set_check_finite(bool on) { check_finite_flag() = on; }
inline bool check_finite_enabled() { return check_finite_flag(); }

}  // namespace debug

using Shape = std::vector<std::size_t>;

inline std::size_t numel_of(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return s.empty() ? 0 : n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

// Dense row-major f64 array of rank 1 or 2. Copies are cheap: the buffer is
// shared, so treat tensors as immutable once they participate in a forward
// pass; in-place mutation (parameter updates, gradient checking) is only done
// between tapes through data().
//
// A tensor may carry a handle onto the tape that recorded it; the handle is
// managed by Tape and identifies the same parameter object across multiple
// uses in one forward pass, which is what makes gradients of shared
// parameters accumulate.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<double>>(numel_of(shape_), 0.0)) {
    check_rank();
  }

  Tensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<double>>(std::move(values))) {
    check_rank();
    if (data_->size() != numel_of(shape_))
      throw ShapeError("Tensor: " + std::to_string(data_->size()) +
                       " values do not fill shape " + shape_str(shape_));
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor vec(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({n}, std::move(v));
  }

  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> v) {
    return Tensor({r, c}, std::move(v));
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

  static Tensor full(Shape s, double v) {
    Tensor t(std::move(s));
    for (double& x : *t.data_) x = v;
    return t;
  }

  static Tensor ones(Shape s) { return full(std::move(s), 1.0); }

  static Tensor random_uniform(Shape s, double lo, double hi, RngStream& rng) {
    Tensor t(std::move(s));
    for (double& x : *t.data_) x = rng.uniform(lo, hi);
    return t;
  }

  static Tensor random_normal(Shape s, double sigma, RngStream& rng) {
    Tensor t(std::move(s));
    for (double& x : *t.data_) x = sigma * rng.normal();
    return t;
  }

  // Glorot-uniform init for a fan_in x fan_out weight matrix.
  static Tensor glorot(std::size_t fan_in, std::size_t fan_out,
                       RngStream& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return random_uniform({fan_in, fan_out}, -a, a, rng);
  }

  bool defined() const { return static_cast<bool>(data_); }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_ ? data_->size() : 0; }

  // Rank-1 tensors act as a single row (the bias / row-vector convention).
  std::size_t rows() const { return rank() == 1 ? 1 : shape_[0]; }
  std::size_t cols() const { return rank() == 1 ? shape_[0] : shape_[1]; }

  const double* data() const { return data_->data(); }
  double* data() { return data_->data(); }

  double at(std::size_t i) const { return (*data_)[i]; }
  double& at(std::size_t i) { return (*data_)[i]; }
  double at(std::size_t r, std::size_t c) const {
    return (*data_)[r * cols() + c];
  }
  double& at(std::size_t r, std::size_t c) { return (*data_)[r * cols() + c]; }

  // Value of a one-element tensor (e.g. a recorded loss).
  double value() const {
    if (numel() != 1)
      throw ContractError("Tensor::value: tensor " + shape_str(shape_) +
                          " is not a scalar");
    return (*data_)[0];
  }

  // Deep copy, detached from any tape.
  Tensor clone() const {
    Tensor t(shape_, *data_);
    t.requires_grad = requires_grad;
    return t;
  }

  // Same buffer, no tape handle, no gradient.
  Tensor detached() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = data_;
    return t;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : *data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool requires_grad = false;

 private:
  void check_rank() const {
    if (shape_.empty() || shape_.size() > 2)
      throw ShapeError("Tensor: rank must be 1 or 2, got shape " +
                       shape_str(shape_));
  }

  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;

  // Tape handle, written by Tape when the tensor is recorded.
  friend class Tape;
  mutable const Tape* tape_ = nullptr;
  mutable std::uint64_t tape_epoch_ = 0;
  mutable int node_ = -1;
};

}  // namespace rgnn
