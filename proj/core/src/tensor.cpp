#include "boneage/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

#include "boneage/error.hpp"

namespace boneage {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  return out.str();
}

Shape parse_shape(const std::string& text) {
  Shape shape;
  std::istringstream in(text);
  std::string token;
  while (std::getline(in, token, 'x')) {
    std::size_t pos = 0;
    unsigned long long extent = 0;
    try {
      extent = std::stoull(token, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != token.size() || extent == 0) {
      throw DimensionError("malformed shape '" + text + "'");
    }
    shape.push_back(static_cast<std::size_t>(extent));
  }
  if (shape.empty()) throw DimensionError("malformed shape '" + text + "'");
  return shape;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive: " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : impl_(std::make_shared<Storage>()) {
  check_shape(shape);
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<float> values) : impl_(std::make_shared<Storage>()) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    std::ostringstream msg;
    msg << "tensor of shape " << shape_string(shape) << " needs " << shape_numel(shape)
        << " values, got " << values.size();
    throw DimensionError(msg.str());
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw DimensionError("axis out of range for shape " + shape_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<float> Tensor::data() {
  shape();
  return impl_->data;
}

std::span<const float> Tensor::data() const {
  shape();
  return impl_->data;
}

float Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on non-scalar tensor " + shape_string(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  shape();
  impl_->requires_grad = value;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const float> Tensor::grad() const {
  shape();
  return impl_->grad;
}

std::span<float> Tensor::grad_buffer() const {
  shape();
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0f);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

Tensor Tensor::clone() const {
  Tensor copy(shape(), impl_->data);
  copy.impl_->requires_grad = impl_->requires_grad;
  return copy;
}

bool Tape::tracks(std::initializer_list<const Tensor*> inputs) const {
  if (!recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

void Tape::record(std::string op, std::vector<Tensor> inputs, Tensor output,
                  std::function<void()> backward) {
  if (!recording()) return;
  nodes_.push_back(Node{std::move(op), std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& root) {
  if (!root.defined() || root.numel() != 1) {
    throw ContractError("backward root must be a scalar tensor");
  }
  const bool on_tape = std::any_of(nodes_.begin(), nodes_.end(),
                                   [&](const Node& n) { return n.output.same_storage(root); });
  if (!on_tape && !root.requires_grad()) {
    throw ContractError("backward root is not recorded on this tape");
  }
  Tensor seed = root;
  seed.grad_buffer()[0] += 1.0f;

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    // Nodes whose output never received a gradient are off the root's path.
    if (!it->output.has_grad()) continue;
    it->backward();
  }
}

std::vector<std::string> Tape::op_names() const {
  std::vector<std::string> names;
  names.reserve(nodes_.size());
  for (const Node& n : nodes_) names.push_back(n.op);
  return names;
}

void ParameterSet::add(std::string name, Tensor tensor) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(tensor));
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

Tensor& ParameterSet::at(const std::string& name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw ContractError("unknown parameter '" + name + "'");
}

const Tensor& ParameterSet::at(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->at(name);
}

std::size_t ParameterSet::total_numel() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

ParameterSet ParameterSet::clone() const {
  ParameterSet copy;
  for (const auto& [name, t] : entries_) copy.add(name, t.clone());
  return copy;
}

bool ParameterSet::identical(const ParameterSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [na, ta] = entries_[i];
    const auto& [nb, tb] = other.entries_[i];
    if (na != nb || ta.shape() != tb.shape()) return false;
    if (std::memcmp(ta.data().data(), tb.data().data(), ta.numel() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace boneage
