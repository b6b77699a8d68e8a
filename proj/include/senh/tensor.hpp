#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace senh {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

// Runtime switch for post-op finiteness checks. Defaults to on in debug
// builds, off in release; tests may force it.
bool debug_checks();
void set_debug_checks(bool on);

class Tape;

// Dense row-major tensor of doubles. Value semantics: copies share storage,
// ops never mutate their inputs. The mutable data() accessor exists for
// parameter initialization and optimizer updates between tapes. The
// requires_grad flag lives in the shared storage, so every alias of a
// parameter agrees on it.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);
  static Tensor scalar(double v);

  bool defined() const { return store_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t numel() const { return store_ ? static_cast<int64_t>(store_->values.size()) : 0; }
  int64_t extent(int axis) const { return shape_.at(static_cast<size_t>(axis)); }

  const std::vector<double>& data() const { return store_->values; }
  std::vector<double>& data() { return store_->values; }
  const double* ptr() const { return store_->values.data(); }
  double* ptr() { return store_->values.data(); }

  // Value of a single-element tensor.
  double value() const;

  bool requires_grad() const { return store_ && store_->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    store_->requires_grad = b;
    return *this;
  }

  // Storage identity; used by Tape to recognise leaf tensors.
  const void* storage_id() const { return store_.get(); }

  Tape* tape() const { return tape_; }
  int node() const { return node_; }

  Tensor clone() const;

 private:
  friend class Tape;
  struct Storage {
    std::vector<double> values;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> store_;
  Shape shape_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

// Reverse-mode tape, rebuilt per forward pass. Creating a Tape makes it the
// active one for the current thread until it is destroyed (stack discipline).
class Tape {
 public:
  // Gradients w.r.t. the node inputs; entries may be left undefined when the
  // corresponding `needed` flag is false.
  using BackwardFn = std::function<std::vector<Tensor>(
      const Tensor& grad_out, const std::vector<char>& needed)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  // Links `out` to `inputs` with the given backward rule. No-op when the tape
  // is not recording or no input participates in differentiation.
  void record(Tensor& out, const std::vector<const Tensor*>& inputs, BackwardFn fn);

  bool recording() const { return recording_; }

  // Reverse sweep from a single-element root.
  void backward(const Tensor& root);

  // Gradient of a tensor after backward(); undefined Tensor when absent.
  Tensor grad(const Tensor& t) const;

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<int> inputs;  // -1 for non-differentiable inputs
    BackwardFn backward;      // empty for leaves
  };

  int input_id(const Tensor& t);
  void accumulate(int node, const Tensor& g);
  int lookup(const Tensor& t) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::unordered_map<const void*, int> leaf_ids_;
  bool recording_ = true;
  Tape* prev_ = nullptr;
};

}  // namespace senh
