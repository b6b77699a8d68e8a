#include <algorithm>
#include <cmath>
#include <iomanip>

#include "senh/gradcheck.hpp"

namespace senh::gradcheck {

double max_rel_error(const std::function<Tensor()>& forward, std::vector<Tensor>& leaves,
                     int probes, double step, Rng& rng) {
  for (Tensor& l : leaves) l.set_requires_grad(true);
  std::vector<Tensor> grads(leaves.size());
  {
    Tape tape;
    Tensor out = forward();
    tape.backward(out);
    for (size_t i = 0; i < leaves.size(); ++i) grads[i] = tape.grad(leaves[i]);
  }
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const size_t li = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(leaves.size())));
    Tensor& leaf = leaves[li];
    const int64_t ei = rng.uniform_int(leaf.numel());
    double& slot = leaf.data()[static_cast<size_t>(ei)];
    const double orig = slot;
    slot = orig + step;
    const double fp = forward().value();
    slot = orig - step;
    const double fm = forward().value();
    slot = orig;
    const double g_fd = (fp - fm) / (2.0 * step);
    const double g_ad =
        grads[li].defined() ? grads[li].data()[static_cast<size_t>(ei)] : 0.0;
    const double rel = std::abs(g_ad - g_fd) / std::max(1.0, std::abs(g_fd));
    worst = std::max(worst, rel);
  }
  return worst;
}

CheckResult run_check(const Check& c, uint64_t seed) {
  Rng rng = Rng::keyed(seed, 0x9c0de, std::hash<std::string>{}(c.name));
  std::vector<Tensor> leaves = c.leaves;
  CheckResult r;
  r.name = c.name;
  r.tol = c.tol;
  r.max_rel_err = max_rel_error(c.forward, leaves, c.probes, c.step, rng);
  r.pass = r.max_rel_err < c.tol;
  return r;
}

std::vector<CheckResult> run_checks(const std::vector<Check>& cs, uint64_t seed) {
  std::vector<CheckResult> rs;
  rs.reserve(cs.size());
  for (const Check& c : cs) rs.push_back(run_check(c, seed));
  return rs;
}

void print_results(const std::vector<CheckResult>& rs, std::ostream& os) {
  for (const CheckResult& r : rs)
    os << (r.pass ? "ok   " : "FAIL ") << std::left << std::setw(28) << r.name
       << " max_rel_err=" << std::scientific << std::setprecision(3) << r.max_rel_err
       << " tol=" << r.tol << std::defaultfloat << "\n";
}

int exit_code(const std::vector<CheckResult>& rs) {
  for (const CheckResult& r : rs)
    if (!r.pass) return 1;
  return 0;
}

}  // namespace senh::gradcheck
