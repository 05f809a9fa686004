#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace boneage {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);

/// Renders a shape as "2x3x4".
std::string shape_string(const Shape& shape);

/// Parses the output of shape_string.
Shape parse_shape(const std::string& text);

/// Dense row-major float32 tensor with an optional gradient buffer.
///
/// A Tensor is a shared handle: copies alias the same storage, which is what
/// lets the tape route gradients back to parameters owned elsewhere. Use
/// clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  bool defined() const noexcept { return impl_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<float> data();
  std::span<const float> data() const;
  float item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);

  bool has_grad() const;
  /// Gradient buffer; empty span when no gradient has been accumulated.
  std::span<const float> grad() const;
  /// Gradient buffer, allocated (zero-filled) on first use. Const because the
  /// handle, not the shared storage, is what callers hold.
  std::span<float> grad_buffer() const;
  void zero_grad();

  Tensor clone() const;
  bool same_storage(const Tensor& other) const noexcept { return impl_ == other.impl_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> impl_;
};

/// Records differentiable operations in execution order and replays their
/// backward rules in reverse.
///
/// An inference tape records nothing and produces outputs that never require
/// a gradient.
class Tape {
 public:
  enum class Mode { kRecord, kInference };

  explicit Tape(Mode mode = Mode::kRecord) : mode_(mode) {}

  static Tape inference() { return Tape(Mode::kInference); }

  bool recording() const noexcept { return mode_ == Mode::kRecord; }

  /// True when an op over `inputs` has to be recorded.
  bool tracks(std::initializer_list<const Tensor*> inputs) const;

  void record(std::string op, std::vector<Tensor> inputs, Tensor output,
              std::function<void()> backward);

  /// Seeds d(root)/d(root) = 1 and runs every recorded backward rule once,
  /// newest first. Leaf gradients accumulate.
  void backward(const Tensor& root);

  std::size_t size() const noexcept { return nodes_.size(); }
  std::vector<std::string> op_names() const;
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> backward;
  };

  Mode mode_;
  std::vector<Node> nodes_;
};

/// Ordered, named collection of trainable tensors.
class ParameterSet {
 public:
  void add(std::string name, Tensor tensor);

  bool contains(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t total_numel() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();
  /// Deep copy of every tensor (gradients dropped).
  ParameterSet clone() const;
  /// Bitwise equality of names, shapes and values.
  bool identical(const ParameterSet& other) const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace boneage
