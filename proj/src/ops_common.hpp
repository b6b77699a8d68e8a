#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "senh/ops.hpp"
#include "senh/parallel.hpp"
#include "senh/tensor.hpp"

namespace senh::detail {

inline void check_finite(const char* op, const Tensor& t) {
  if (!debug_checks()) return;
  for (double v : t.data())
    if (!std::isfinite(v))
      throw std::runtime_error(std::string(op) + ": non-finite value in result");
}

// Registers the backward rule on the active tape (if recording) and runs the
// debug finiteness check. Every op funnels its output through here.
inline void attach(const char* op, Tensor& out, const std::vector<const Tensor*>& inputs,
                   Tape::BackwardFn fn) {
  check_finite(op, out);
  if (Tape* t = Tape::active()) t->record(out, inputs, std::move(fn));
}

[[noreturn]] inline void fail_shape(const std::string& op, const std::string& detail) {
  throw std::invalid_argument(op + ": " + detail);
}

inline void require(bool cond, const std::string& op, const std::string& detail) {
  if (!cond) fail_shape(op, detail);
}

inline void require_rank4(const char* op, const Tensor& t, const char* name) {
  if (t.rank() != 4)
    fail_shape(op, std::string(name) + " must be rank 4, got " + shape_str(t.shape()));
}

}  // namespace senh::detail
