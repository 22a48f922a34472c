#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bepal::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
};
}  // namespace detail

class Tensor;
// Receives the op output (values and populated grad).
using BackwardFn = std::function<void(const detail::TensorData& out)>;

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// Tensor is a handle: copies share storage. Leaf tensors created with
/// requires_grad are parameters; op outputs inherit requires_grad from their
/// inputs when recorded on an active Tape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  std::size_t ndim() const { return data_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return data_->shape.at(axis); }
  std::size_t numel() const { return data_->values.size(); }

  std::span<const double> values() const { return data_->values; }
  // Direct writes are for parameter updates and initialization only.
  std::span<double> mutable_values() { return data_->values; }

  double item() const;
  double operator[](std::size_t i) const { return data_->values[i]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return data_->requires_grad; }
  bool has_grad() const { return !data_->grad.empty(); }
  std::span<const double> grad() const { return data_->grad; }
  /// Gradient buffer, allocated (zero-filled) on first use.
  std::span<double> grad_buffer() const;
  void zero_grad();

  /// Copy of the values with no gradient tracking.
  Tensor detach() const;
  Tensor clone(bool requires_grad) const;

  bool same_storage(const Tensor& other) const { return data_ == other.data_; }
  const std::shared_ptr<detail::TensorData>& data() const { return data_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorData> d) : data_(std::move(d)) {}
  std::shared_ptr<detail::TensorData> data_;

  friend Tensor make_op_result(const char*, Shape, std::vector<double>, std::vector<Tensor>,
                               BackwardFn);
};

/// Ordered record of differentiable ops. At most one tape is active per
/// thread; ops executed while a tape is active and touching a
/// requires_grad input are recorded on it.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Seeds d(loss)/d(loss) = 1 and replays the record in reverse. Leaf
  /// gradients accumulate across calls; intermediate gradients are reset.
  void backward(const Tensor& loss);

  void clear();
  std::size_t size() const { return entries_.size(); }

  static Tape* active();

  /// Makes a tape active for the lifetime of the scope.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

 private:
  struct Entry {
    const char* op;
    std::shared_ptr<detail::TensorData> output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;

  friend Tensor make_op_result(const char*, Shape, std::vector<double>, std::vector<Tensor>,
                               BackwardFn);
};

/// Builds an op output. Values are checked for finiteness. When a tape is
/// active and any input requires grad, the output requires grad and
/// `backward` is recorded; it receives the output (with gradient) and must
/// accumulate into the inputs' grad_buffer().
Tensor make_op_result(const char* op, Shape shape, std::vector<double> values,
                      std::vector<Tensor> inputs, BackwardFn backward);

/// True when an op over these inputs would be recorded.
bool will_record(std::initializer_list<const Tensor*> inputs);

void check_finite(const char* what, std::span<const double> values);

}  // namespace bepal::num
