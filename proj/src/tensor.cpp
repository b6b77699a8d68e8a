#include "senh/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace senh {

namespace {

#ifdef NDEBUG
bool g_debug_checks = false;
#else
bool g_debug_checks = true;
#endif

thread_local Tape* g_active_tape = nullptr;

}  // namespace

bool debug_checks() { return g_debug_checks; }
void set_debug_checks(bool on) { g_debug_checks = on; }

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

static void validate_shape(const Shape& s) {
  if (s.empty() || s.size() > 5)
    throw std::invalid_argument("tensor: rank must be 1..5, got " + shape_str(s));
  for (int64_t e : s)
    if (e < 1) throw std::invalid_argument("tensor: extents must be >= 1, got " + shape_str(s));
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  store_ = std::make_shared<Storage>();
  store_->values.assign(static_cast<size_t>(shape_numel(shape_)), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  validate_shape(shape_);
  if (static_cast<int64_t>(values.size()) != shape_numel(shape_))
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(shape_));
  store_ = std::make_shared<Storage>();
  store_->values = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

double Tensor::value() const {
  if (!defined() || numel() != 1)
    throw std::logic_error("tensor: value() needs a single-element tensor");
  return store_->values[0];
}

Tensor Tensor::clone() const {
  if (!defined()) return {};
  Tensor out;
  out.shape_ = shape_;
  out.store_ = std::make_shared<Storage>();
  out.store_->values = store_->values;
  return out;
}

Tape::Tape() {
  prev_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

int Tape::input_id(const Tensor& t) {
  if (t.tape_ == this && t.node_ >= 0) return t.node_;
  if (!t.requires_grad()) return -1;
  // Leaf tensors are keyed by storage so repeated uses share one node.
  auto it = leaf_ids_.find(t.storage_id());
  if (it != leaf_ids_.end()) return it->second;
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{});
  leaf_ids_.emplace(t.storage_id(), id);
  return id;
}

void Tape::record(Tensor& out, const std::vector<const Tensor*>& inputs, BackwardFn fn) {
  if (!recording_) return;
  std::vector<int> ids(inputs.size(), -1);
  bool any = false;
  for (size_t i = 0; i < inputs.size(); ++i) {
    ids[i] = input_id(*inputs[i]);
    any = any || ids[i] >= 0;
  }
  if (!any) return;
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{std::move(ids), std::move(fn)});
  out.tape_ = this;
  out.node_ = id;
}

void Tape::accumulate(int node, const Tensor& g) {
  Tensor& slot = grads_[static_cast<size_t>(node)];
  if (!slot.defined()) {
    // Stored as-is; gradients are never mutated in place, only replaced by
    // fresh sums, so sharing storage with a sibling is safe.
    slot = g;
    return;
  }
  if (slot.numel() != g.numel())
    throw std::logic_error("tape: gradient shape mismatch during accumulation");
  Tensor sum(slot.shape());
  const double* a = slot.ptr();
  const double* b = g.ptr();
  double* o = sum.ptr();
  const int64_t n = slot.numel();
  for (int64_t i = 0; i < n; ++i) o[i] = a[i] + b[i];
  grads_[static_cast<size_t>(node)] = std::move(sum);
}

void Tape::backward(const Tensor& root) {
  if (root.tape_ != this || root.node_ < 0)
    throw std::logic_error("tape: backward root was not produced on this tape");
  if (root.numel() != 1)
    throw std::logic_error("tape: backward root must be a single-element tensor, got " +
                           shape_str(root.shape()));
  grads_.assign(nodes_.size(), Tensor{});
  grads_[static_cast<size_t>(root.node_)] = Tensor::scalar(1.0);

  // Ops called from backward rules must not grow the tape mid-sweep.
  recording_ = false;
  for (int i = root.node_; i >= 0; --i) {
    const Node& node = nodes_[static_cast<size_t>(i)];
    const Tensor& g = grads_[static_cast<size_t>(i)];
    if (!g.defined() || !node.backward) continue;
    std::vector<char> needed(node.inputs.size(), 0);
    for (size_t j = 0; j < node.inputs.size(); ++j) needed[j] = node.inputs[j] >= 0;
    std::vector<Tensor> gs = node.backward(g, needed);
    if (gs.size() != node.inputs.size())
      throw std::logic_error("tape: backward rule returned wrong arity");
    for (size_t j = 0; j < gs.size(); ++j) {
      if (node.inputs[j] < 0 || !gs[j].defined()) continue;
      if (debug_checks()) {
        for (double v : gs[j].data())
          if (!std::isfinite(v)) throw std::runtime_error("tape: non-finite gradient");
      }
      accumulate(node.inputs[j], gs[j]);
    }
  }
  recording_ = true;
}

int Tape::lookup(const Tensor& t) const {
  if (t.tape_ == this && t.node_ >= 0) return t.node_;
  auto it = leaf_ids_.find(t.storage_id());
  return it == leaf_ids_.end() ? -1 : it->second;
}

Tensor Tape::grad(const Tensor& t) const {
  int id = lookup(t);
  if (id < 0 || static_cast<size_t>(id) >= grads_.size()) return {};
  return grads_[static_cast<size_t>(id)];
}

}  // namespace senh
