#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmem/gradcheck.hpp"
#include "dmem/rng.hpp"
#include "dmem/tensor.hpp"
#include "helpers.hpp"

using namespace dmem;
using testhelp::fd_rel_err;
using testhelp::random_tensor;

TEST_CASE("tensor shape/data size mismatch is rejected") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  CHECK_NOTHROW(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
}

TEST_CASE("matmul identity and selection cases") {
  Tape tape;
  Var i2 = tape.leaf(Tensor::mat(2, 2, {1, 0, 0, 1}));
  Var a = tape.leaf(Tensor::mat(2, 2, {1, 2, 3, 4}));
  const Tensor& prod = tape.val(tape.matmul(i2, a));
  CHECK(prod.data == std::vector<double>{1, 2, 3, 4});

  Var sel = tape.leaf(Tensor::mat(1, 2, {1, 0}));
  Var col = tape.leaf(Tensor::mat(2, 1, {0, 5}));
  CHECK(tape.val(tape.matmul(sel, col)).data[0] == 0.0);
}

TEST_CASE("matmul matches a naive triple-loop oracle") {
  Rng rng(11);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  Tensor want = Tensor::zeros({3, 2});
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 2; ++j)
      for (size_t k = 0; k < 4; ++k) want.at(i, j) += a.at(i, k) * b.at(k, j);

  Tape tape;
  const Tensor& got = tape.val(tape.matmul(tape.leaf(a), tape.leaf(b)));
  REQUIRE(got.shape == want.shape);
  for (size_t i = 0; i < got.size(); ++i) CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
}

TEST_CASE("matmul dimension mismatch throws") {
  Tape tape;
  Var a = tape.leaf(Tensor::mat(2, 3, std::vector<double>(6, 1.0)));
  Var b = tape.leaf(Tensor::mat(2, 2, std::vector<double>(4, 1.0)));
  CHECK_THROWS_AS(tape.matmul(a, b), ShapeError);
}

TEST_CASE("elementwise trivial values") {
  Tape tape;
  Var z = tape.leaf(Tensor::scalar(0.0));
  CHECK(tape.val(tape.tanh(z)).data[0] == 0.0);
  CHECK(tape.val(tape.sigmoid(z)).data[0] == 0.5);
  CHECK(tape.val(tape.exp(z)).data[0] == 1.0);
}

TEST_CASE("elementwise incompatible shapes throw") {
  Tape tape;
  Var a = tape.leaf(Tensor::vec({1, 2, 3}));
  Var b = tape.leaf(Tensor::vec({1, 2}));
  CHECK_THROWS_AS(tape.add(a, b), ShapeError);
  CHECK_THROWS_AS(tape.mul(a, b), ShapeError);
}

TEST_CASE("scalar broadcasting against tensors") {
  Tape tape;
  Var s = tape.leaf(Tensor::scalar(2.0));
  Var v = tape.leaf(Tensor::vec({1, 2, 3}));
  CHECK(tape.val(tape.mul(s, v)).data == std::vector<double>{2, 4, 6});
  CHECK(tape.val(tape.sub(s, v)).data == std::vector<double>{1, 0, -1});
  CHECK(tape.val(tape.add(v, s)).data == std::vector<double>{3, 4, 5});
}

TEST_CASE("softmax basics and shift invariance") {
  Tape tape;
  const Tensor& half = tape.val(tape.softmax(tape.leaf(Tensor::vec({0, 0}))));
  CHECK(half.data[0] == doctest::Approx(0.5).epsilon(1e-15));

  // high-precision oracle for [1,2,3]
  long double e1 = expl(1.0L), e2 = expl(2.0L), e3 = expl(3.0L), z = e1 + e2 + e3;
  const Tensor& sm = tape.val(tape.softmax(tape.leaf(Tensor::vec({1, 2, 3}))));
  CHECK(std::abs(sm.data[0] - static_cast<double>(e1 / z)) < 1e-12);
  CHECK(std::abs(sm.data[1] - static_cast<double>(e2 / z)) < 1e-12);
  CHECK(std::abs(sm.data[2] - static_cast<double>(e3 / z)) < 1e-12);

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    size_t n = 1 + rng.next_below(8);
    Tensor x = random_tensor({n}, rng, 5.0);
    Tensor shifted = x;
    double c = rng.uniform(-10, 10);
    for (double& v : shifted.data) v += c;
    Tape t2;
    const Tensor& p = t2.val(t2.softmax(t2.leaf(x)));
    const Tensor& q = t2.val(t2.softmax(t2.leaf(shifted)));
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      CHECK(p.data[i] >= 0.0);
      CHECK(std::abs(p.data[i] - q.data[i]) < 1e-12);
      sum += p.data[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax handles extreme scores without overflow") {
  Tape tape;
  const Tensor& p = tape.val(tape.softmax(tape.leaf(Tensor::vec({1000.0, 0.0, -1000.0}))));
  CHECK(std::isfinite(p.data[0]));
  CHECK(p.data[0] == doctest::Approx(1.0));
}

TEST_CASE("concat values and gradient split") {
  Tape tape;
  Var a = tape.leaf(Tensor::vec({1}));
  Var empty = tape.leaf(Tensor::zeros({0}));
  CHECK(tape.val(tape.concat(a, empty)).data == std::vector<double>{1});

  Var b = tape.leaf(Tensor::vec({1, 2}));
  Var c = tape.leaf(Tensor::vec({3}));
  CHECK(tape.val(tape.concat(b, c)).data == std::vector<double>{1, 2, 3});

  Var loss = tape.sum(tape.concat(b, c));
  tape.backward(loss);
  CHECK(tape.grad(b).data == std::vector<double>{1, 1});
  CHECK(tape.grad(c).data == std::vector<double>{1});
}

TEST_CASE("backward trivial cases") {
  {
    Tape tape;
    Var p = tape.leaf(Tensor::scalar(7.0));
    tape.backward(p);
    CHECK(tape.grad(p).data[0] == 1.0);
  }
  {
    Tape tape;
    Var p = tape.leaf(Tensor::scalar(3.0));
    Var loss = tape.mul(p, p);
    tape.backward(loss);
    CHECK(tape.grad(p).data[0] == 6.0);
  }
}

TEST_CASE("backward rejects a non-scalar loss") {
  Tape tape;
  Var v = tape.leaf(Tensor::vec({1, 2}));
  CHECK_THROWS_AS(tape.backward(v), ContractError);
}

TEST_CASE("every primitive op passes finite differences on random inputs") {
  Rng rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    size_t n = 2 + rng.next_below(4);
    size_t m = 2 + rng.next_below(4);

    CHECK(fd_rel_err({random_tensor({n}, rng)}, [](Tape& t, const std::vector<Var>& v) {
            return t.sum(t.tanh(v[0]));
          }) < 1e-4);
    CHECK(fd_rel_err({random_tensor({n}, rng)}, [](Tape& t, const std::vector<Var>& v) {
            return t.sum(t.sigmoid(v[0]));
          }) < 1e-4);
    CHECK(fd_rel_err({random_tensor({n}, rng)}, [](Tape& t, const std::vector<Var>& v) {
            return t.sum(t.exp(v[0]));
          }) < 1e-4);
    CHECK(fd_rel_err({random_tensor({n}, rng), random_tensor({n}, rng)},
                     [](Tape& t, const std::vector<Var>& v) {
                       return t.sum(t.mul(v[0], v[1]));
                     }) < 1e-4);
    CHECK(fd_rel_err({random_tensor({n}, rng), random_tensor({n}, rng)},
                     [](Tape& t, const std::vector<Var>& v) {
                       return t.sum(t.mul(t.sub(v[0], v[1]), t.add(v[0], v[1])));
                     }) < 1e-4);
    CHECK(fd_rel_err({random_tensor({1}, rng), random_tensor({n}, rng)},
                     [](Tape& t, const std::vector<Var>& v) {
                       // scalar broadcast through sub and mul
                       return t.sum(t.mul(v[1], t.sub(v[0], v[1])));
                     }) < 1e-4);
    CHECK(fd_rel_err({random_tensor({m, n}, rng), random_tensor({n}, rng)},
                     [](Tape& t, const std::vector<Var>& v) {
                       return t.sum(t.matvec(v[0], v[1]));
                     }) < 1e-4);
    CHECK(fd_rel_err({random_tensor({m, n}, rng), random_tensor({n, m}, rng)},
                     [](Tape& t, const std::vector<Var>& v) {
                       return t.sum(t.tanh(t.matmul(v[0], v[1])));
                     }) < 1e-4);
    CHECK(fd_rel_err({random_tensor({n}, rng), random_tensor({n}, rng)},
                     [](Tape& t, const std::vector<Var>& v) {
                       // weighted sum so the softmax Jacobian is exercised
                       return t.sum(t.mul(t.softmax(v[0]), v[1]));
                     }) < 1e-4);
    CHECK(fd_rel_err({random_tensor({n}, rng)}, [n](Tape& t, const std::vector<Var>& v) {
            return t.pick(t.softmax(v[0]), n - 1);
          }) < 1e-4);
    CHECK(fd_rel_err({random_tensor({n}, rng), random_tensor({m}, rng)},
                     [](Tape& t, const std::vector<Var>& v) {
                       return t.sum(t.tanh(t.concat(v[0], v[1])));
                     }) < 1e-4);
    CHECK(fd_rel_err({random_tensor({m, n}, rng)}, [m](Tape& t, const std::vector<Var>& v) {
            return t.sum(t.row(v[0], m - 1));
          }) < 1e-4);
    CHECK(fd_rel_err({random_tensor({n}, rng), random_tensor({n}, rng)},
                     [](Tape& t, const std::vector<Var>& v) {
                       std::vector<Var> scalars;
                       for (size_t i = 0; i < t.val(v[0]).size(); ++i)
                         scalars.push_back(t.pick(v[0], i));
                       return t.sum(t.mul(t.softmax(t.stack(scalars)), v[1]));
                     }) < 1e-4);
    CHECK(fd_rel_err({random_tensor({n}, rng, 3.0)}, [](Tape& t, const std::vector<Var>& v) {
            return t.cross_entropy(v[0], 0);
          }) < 1e-4);
  }
}

TEST_CASE("shared subexpressions accumulate like the expanded tree") {
  // loss built twice: once sharing node s, once with s recomputed from
  // duplicate leaves. Gradients w.r.t. the underlying values must agree.
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a = random_tensor({3}, rng);
    Tensor b = random_tensor({3}, rng);

    Tape shared;
    Var va = shared.leaf(a), vb = shared.leaf(b);
    Var s = shared.tanh(shared.add(va, vb));
    Var loss = shared.sum(shared.mul(s, s));
    shared.backward(loss);

    Tape expanded;
    Var xa1 = expanded.leaf(a), xb1 = expanded.leaf(b);
    Var xa2 = expanded.leaf(a), xb2 = expanded.leaf(b);
    Var s1 = expanded.tanh(expanded.add(xa1, xb1));
    Var s2 = expanded.tanh(expanded.add(xa2, xb2));
    Var loss2 = expanded.sum(expanded.mul(s1, s2));
    expanded.backward(loss2);

    for (size_t i = 0; i < 3; ++i) {
      double want_a = expanded.grad(xa1).data[i] + expanded.grad(xa2).data[i];
      double want_b = expanded.grad(xb1).data[i] + expanded.grad(xb2).data[i];
      CHECK(shared.grad(va).data[i] == doctest::Approx(want_a).epsilon(1e-12));
      CHECK(shared.grad(vb).data[i] == doctest::Approx(want_b).epsilon(1e-12));
    }

    // symbolic oracle for d/da Σ tanh(a+b)² = 2·tanh(a+b)·(1−tanh²(a+b))
    for (size_t i = 0; i < 3; ++i) {
      double th = std::tanh(a.data[i] + b.data[i]);
      CHECK(shared.grad(va).data[i] == doctest::Approx(2.0 * th * (1.0 - th * th)).epsilon(1e-12));
    }
  }
}

TEST_CASE("cross entropy equals -log softmax[target]") {
  Tape tape;
  Tensor logits = Tensor::vec({0.3, -1.2, 2.0, 0.0});
  Var l = tape.leaf(logits);
  double ce = tape.val(tape.cross_entropy(l, 2)).data[0];
  const Tensor& p = tape.val(tape.softmax(tape.leaf(logits)));
  CHECK(ce == doctest::Approx(-std::log(p.data[2])).epsilon(1e-12));
}

TEST_CASE("all forward values stay finite on finite inputs") {
  Rng rng(5);
  Tape tape;
  Var x = tape.leaf(random_tensor({6}, rng, 50.0));
  for (Var v : {tape.tanh(x), tape.sigmoid(x), tape.softmax(x)})
    for (double d : tape.val(v).data) CHECK(std::isfinite(d));
}

TEST_CASE("grad_check harness behaviour") {
  SUBCASE("constant function passes") {
    ParamStore p;
    p.add("x", Tensor::vec({1.0, 2.0}));
    LossFn f = [](const ParamStore&, ParamStore*) { return 4.0; };
    GradCheckReport r = grad_check(p, f, 1e-5, 1e-4);
    CHECK(r.pass);
  }
  SUBCASE("linear function matches within truncation error") {
    ParamStore p;
    p.add("x", Tensor::scalar(2.0));
    LossFn f = [](const ParamStore& s, ParamStore* g) {
      if (g) g->at("x").data[0] += 3.0;
      return 3.0 * s.at("x").data[0];
    };
    GradCheckReport r = grad_check(p, f, 1e-5, 1e-4);
    CHECK(r.pass);
    CHECK(r.max_rel_err < 1e-8);
  }
  SUBCASE("wrong analytic gradient fails") {
    ParamStore p;
    p.add("x", Tensor::scalar(2.0));
    LossFn f = [](const ParamStore& s, ParamStore* g) {
      if (g) g->at("x").data[0] += 2.5;  // should be 3
      return 3.0 * s.at("x").data[0];
    };
    CHECK_FALSE(grad_check(p, f, 1e-5, 1e-4).pass);
  }
  SUBCASE("non-deterministic loss is detected") {
    ParamStore p;
    p.add("x", Tensor::scalar(0.0));
    int calls = 0;
    LossFn f = [&calls](const ParamStore&, ParamStore*) { return static_cast<double>(calls++); };
    CHECK_THROWS_AS(grad_check(p, f, 1e-5, 1e-4), ContractError);
  }
}

TEST_CASE("negative control: corrupted tanh rule fails finite differences") {
  Rng rng(9);
  Tensor x = random_tensor({4}, rng);
  testing::corrupt_tanh_grad = true;
  double err = fd_rel_err({x}, [](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.tanh(v[0]));
  });
  testing::corrupt_tanh_grad = false;
  CHECK(err > 1e-3);
}
