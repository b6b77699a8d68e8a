#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "senh/rng.hpp"
#include "senh/tensor.hpp"

namespace senh::gradcheck {

struct CheckResult {
  std::string name;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool pass = false;
};

// A check evaluates `forward` (a deterministic closure producing a scalar from
// the current contents of `leaves`) once under a tape, then probes random
// leaf elements with central differences of the same closure.
struct Check {
  std::string name;
  std::function<Tensor()> forward;
  std::vector<Tensor> leaves;
  double tol = 1e-4;
  int probes = 100;
  double step = 1e-5;
};

// Max of |g_ad - g_fd| / max(1, |g_fd|) over the probes.
double max_rel_error(const std::function<Tensor()>& forward, std::vector<Tensor>& leaves,
                     int probes, double step, Rng& rng);

CheckResult run_check(const Check& c, uint64_t seed);
std::vector<CheckResult> run_checks(const std::vector<Check>& cs, uint64_t seed);

// Suites behind the CLI's scopes.
std::vector<Check> op_suite(uint64_t seed);
std::vector<Check> block_suite(uint64_t seed);
std::vector<Check> model_suite(uint64_t seed);

void print_results(const std::vector<CheckResult>& rs, std::ostream& os);
int exit_code(const std::vector<CheckResult>& rs);  // 0 iff all passed

}  // namespace senh::gradcheck
