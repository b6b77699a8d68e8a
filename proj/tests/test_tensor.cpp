#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdexcept>

#include "senh/ops.hpp"
#include "senh/tensor.hpp"
#include "tests/helpers.hpp"

using namespace senh;

TEST_CASE("tensor construction and validation") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.data()[5] == 1.5);

  CHECK_THROWS_AS(Tensor(Shape{}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({1, 2, 3, 4, 5, 6}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1.0}), std::invalid_argument);

  Tensor s = Tensor::scalar(4.0);
  CHECK(s.value() == 4.0);
  CHECK_THROWS_AS(t.value(), std::logic_error);
}

TEST_CASE("copies share storage, clones do not") {
  Tensor a({2, 2}, 1.0);
  Tensor b = a;
  b.data()[0] = 9.0;
  CHECK(a.data()[0] == 9.0);
  Tensor c = a.clone();
  c.data()[1] = 7.0;
  CHECK(a.data()[1] == 1.0);
  CHECK(a.storage_id() == b.storage_id());
  CHECK(a.storage_id() != c.storage_id());
}

TEST_CASE("backward requires a scalar root on the active tape") {
  Tensor x({2, 2}, 1.0);
  x.set_requires_grad(true);
  Tape tape;
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(tape.backward(y), std::logic_error);  // non-scalar
  Tensor off_tape({1}, 2.0);
  CHECK_THROWS_AS(tape.backward(off_tape), std::logic_error);
}

TEST_CASE("grad of sum is ones") {
  Tensor x({2, 3}, 0.0);
  Rng rng(7);
  for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
  x.set_requires_grad(true);
  Tape tape;
  Tensor loss = reduce_sum(x);
  tape.backward(loss);
  Tensor g = tape.grad(x);
  REQUIRE(g.defined());
  CHECK(g.shape() == x.shape());
  for (double v : g.data()) CHECK(v == 1.0);
}

TEST_CASE("grad of sum(x*x) is 2x") {
  Tensor x({4}, std::vector<double>{0.5, -1.0, 2.0, 3.0});
  x.set_requires_grad(true);
  Tape tape;
  Tensor loss = reduce_sum(mul(x, x));
  tape.backward(loss);
  Tensor g = tape.grad(x);
  REQUIRE(g.defined());
  for (size_t i = 0; i < 4; ++i) CHECK(g.data()[i] == doctest::Approx(2.0 * x.data()[i]).epsilon(1e-15));
}

TEST_CASE("leaf used twice accumulates fan-in gradients") {
  // loss = sum(x + x) -> grad 2 everywhere, through two distinct uses.
  Tensor x({3}, std::vector<double>{1.0, 2.0, 3.0});
  x.set_requires_grad(true);
  Tape tape;
  Tensor loss = reduce_sum(add(x, x));
  tape.backward(loss);
  Tensor g = tape.grad(x);
  REQUIRE(g.defined());
  for (double v : g.data()) CHECK(v == 2.0);
}

TEST_CASE("no tape means no recording") {
  Tensor x({2}, 1.0);
  x.set_requires_grad(true);
  Tensor y = mul(x, x);
  CHECK(y.tape() == nullptr);
  CHECK(y.node() == -1);
}

TEST_CASE("tensors without requires_grad produce no nodes") {
  Tensor x({2}, 1.0);
  Tape tape;
  Tensor y = mul(x, x);
  CHECK(tape.node_count() == 0);
  CHECK(y.node() == -1);
}

TEST_CASE("intermediate gradients are retained with matching shapes") {
  Tensor x({2, 2}, 2.0);
  x.set_requires_grad(true);
  Tape tape;
  Tensor y = mul(x, x);
  Tensor loss = reduce_sum(y);
  tape.backward(loss);
  Tensor gy = tape.grad(y);
  REQUIRE(gy.defined());
  CHECK(gy.shape() == y.shape());
  for (double v : gy.data()) CHECK(v == 1.0);
}

TEST_CASE("nested tapes restore the outer one") {
  CHECK(Tape::active() == nullptr);
  {
    Tape outer;
    CHECK(Tape::active() == &outer);
    {
      Tape inner;
      CHECK(Tape::active() == &inner);
    }
    CHECK(Tape::active() == &outer);
  }
  CHECK(Tape::active() == nullptr);
}

TEST_CASE("forward determinism: identical runs produce identical bits") {
  auto run = [] {
    Rng rng(1234);
    Tensor x = testutil::random_tensor({2, 3, 8, 8}, rng);
    Tensor w = testutil::random_tensor({3, 3}, rng);
    Tensor b = testutil::random_tensor({3}, rng);
    Tensor y = linear_channels(sigmoid(x), w, b);
    return softmax_lastdim(y);
  };
  CHECK(testutil::bitwise_equal(run(), run()));
}
