// SPDX-License-Identifier: Apache-2.0
//
// Autodiff correctness: every op's gradient against central finite
// differences, second-order (grad-of-grad) behavior, and the tape contracts.

#include "graphpoison/rng.hpp"
#include "graphpoison/tape.hpp"

#include <doctest.h>

#include <cmath>

using namespace graphpoison;

namespace {

Tensor random_tensor(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform_real(lo, hi);
  return t;
}

double max_rel_err(const Tensor& got, const Tensor& want, double floor = 1e-6) {
  REQUIRE(got.same_shape(want));
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double denom = std::max(std::abs(want.values()[i]), floor);
    worst = std::max(worst, std::abs(got.values()[i] - want.values()[i]) / denom);
  }
  return worst;
}

// Checks d(sum-like scalar)/d(leaf) against finite differences for a
// tape-builder f(tape, leaf_node) -> scalar node.
void check_gradient(const Tensor& at,
                    const std::function<NodeId(Tape&, NodeId)>& build,
                    double tol = 1e-5, double step = 1e-6) {
  Tape tape;
  const NodeId leaf = tape.leaf(at);
  const NodeId loss = build(tape, leaf);
  const NodeId wrt[1] = {leaf};
  const Tensor grad = tape.backward_values(loss, wrt).at(leaf);

  const Tensor fd = finite_difference_gradient(
      [&](const Tensor& x) {
        Tape t2;
        const NodeId l2 = t2.leaf(x);
        return t2.value(build(t2, l2)).scalar_value();
      },
      at, step);
  CHECK(max_rel_err(grad, fd, 1e-4) < tol);

  // The recorded-gradient path must agree with the value path bit-for-bit.
  Tape tape2;
  const NodeId leaf2 = tape2.leaf(at);
  const NodeId loss2 = build(tape2, leaf2);
  const NodeId wrt2[1] = {leaf2};
  const NodeId gnode = tape2.backward_nodes(loss2, wrt2).at(leaf2);
  CHECK(tape2.value(gnode).max_abs_diff(grad) == 0.0);
}

}  // namespace

TEST_CASE("tensor invariants") {
  CHECK_THROWS(Tensor(2, 2, Tensor::Storage{1.0, 2.0, 3.0}));
  const Tensor t = Tensor::from({{1, 2}, {3, 4}});
  CHECK(t(1, 0) == 3.0);
  CHECK_THROWS(kernels::matmul(Tensor(2, 3), Tensor(4, 2)));
  CHECK_THROWS(kernels::add(Tensor(2, 3), Tensor(3, 2)));
}

TEST_CASE("non-finite values are surfaced, not propagated") {
  Tape tape;
  CHECK_THROWS(tape.leaf(Tensor::full(1, 1, std::numeric_limits<double>::quiet_NaN())));
  const NodeId zero = tape.leaf(Tensor::zeros(1, 1));
  CHECK_THROWS(tape.reciprocal(zero));  // 1/0 -> inf
  CHECK_THROWS(tape.log(zero));         // log 0 -> -inf
}

TEST_CASE("forward examples") {
  Rng rng(1);
  Tape tape;
  const NodeId a = tape.leaf(random_tensor(2, 3, rng));
  const NodeId b = tape.leaf(random_tensor(3, 4, rng));
  CHECK(tape.value(tape.matmul(a, b)).rows() == 2);
  CHECK(tape.value(tape.matmul(a, b)).cols() == 4);

  const NodeId z = tape.leaf(Tensor::from({{0, 0}}));
  const Tensor sm = tape.value(tape.row_softmax(z));
  CHECK(sm(0, 0) == doctest::Approx(0.5));
  CHECK(sm(0, 1) == doctest::Approx(0.5));

  const NodeId r = tape.leaf(Tensor::from({{-1, 2}}));
  const Tensor rv = tape.value(tape.relu(r));
  CHECK(rv(0, 0) == 0.0);
  CHECK(rv(0, 1) == 2.0);

  CHECK_THROWS(tape.record(Op::MatMul, std::array<NodeId, 1>{a}));  // arity
}

TEST_CASE("scalar product rule") {
  Tape tape;
  const NodeId x = tape.leaf(Tensor::scalar(2.0));
  const NodeId y = tape.leaf(Tensor::scalar(3.0));
  const NodeId f = tape.mul(x, y);
  const NodeId wrt[2] = {x, y};
  auto g = tape.backward_values(f, wrt);
  CHECK(g.at(x).scalar_value() == 3.0);
  CHECK(g.at(y).scalar_value() == 2.0);
}

TEST_CASE("second derivative of x^3 via recorded gradients") {
  Tape tape;
  const NodeId x = tape.leaf(Tensor::scalar(2.0));
  const NodeId f = tape.mul(tape.mul(x, x), x);
  const NodeId wrt[1] = {x};
  const NodeId df = tape.backward_nodes(f, wrt).at(x);
  CHECK(tape.value(df).scalar_value() == doctest::Approx(12.0));  // 3x^2
  const NodeId ddf = tape.backward_nodes(df, wrt).at(x);
  CHECK(tape.value(ddf).scalar_value() == doctest::Approx(12.0).epsilon(1e-12));  // 6x
}

TEST_CASE("cross-entropy of softmax gradient is softmax minus onehot") {
  Tape tape;
  const NodeId z = tape.leaf(Tensor::from({{1, 0}}));
  const NodeId probs = tape.row_softmax(z);
  const NodeId loss = tape.cross_entropy(probs, make_indices({0}));
  const NodeId wrt[1] = {z};
  const Tensor g = tape.backward_values(loss, wrt).at(z);
  const double s0 = std::exp(1.0) / (std::exp(1.0) + 1.0);
  CHECK(g(0, 0) == doctest::Approx(s0 - 1.0).epsilon(1e-9));
  CHECK(g(0, 1) == doctest::Approx(1.0 - s0).epsilon(1e-9));

  check_gradient(Tensor::from({{1, 0}}), [](Tape& t, NodeId leaf) {
    return t.cross_entropy(t.row_softmax(leaf), make_indices({0}));
  });
}

TEST_CASE("finite differences of simple functions") {
  const Tensor fd = finite_difference_gradient(
      [](const Tensor& x) { return x(0, 0) * x(0, 0); }, Tensor::scalar(3.0), 1e-5);
  CHECK(fd.scalar_value() == doctest::Approx(6.0).epsilon(1e-7));

  const Tensor fd2 = finite_difference_gradient(
      [](const Tensor& w) {
        double s = 0.0;
        for (double v : w.values()) s += v * v;
        return s;
      },
      Tensor::from({{1, 2}}), 1e-5);
  CHECK(fd2(0, 0) == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(fd2(0, 1) == doctest::Approx(4.0).epsilon(1e-7));

  CHECK_THROWS(finite_difference_gradient([](const Tensor&) { return 0.0; },
                                          Tensor::scalar(1.0), 0.0));
}

TEST_CASE("every op kind matches finite differences") {
  Rng rng(7);
  // Each builder reduces the op output to a scalar through sum_all composed
  // with a second elementwise op, so gradients are non-trivial.
  auto reduce = [](Tape& t, NodeId x) { return t.sum_all(t.mul(x, t.exp(t.scale(x, 0.1)))); };

  for (int round = 0; round < 3; ++round) {
    const int n = 2 + static_cast<int>(rng.uniform(7));  // up to 8x8
    const int m = 2 + static_cast<int>(rng.uniform(7));
    // Drawn up front: the builders must describe the same function on every
    // rebuild, or finite differencing is meaningless.
    const Tensor c_matmul = random_tensor(m, 3, rng);
    const Tensor c_same1 = random_tensor(n, m, rng);
    const Tensor c_same2 = random_tensor(n, m, rng);
    const Tensor c_same3 = random_tensor(n, m, rng);
    const Tensor c_same4 = random_tensor(n, m, rng);
    const Tensor c_big = random_tensor(n, m, rng);

    check_gradient(random_tensor(n, m, rng), [&](Tape& t, NodeId x) {
      return reduce(t, t.matmul(x, t.constant(c_matmul)));
    });
    check_gradient(random_tensor(n, m, rng), [&](Tape& t, NodeId x) {
      // a^T.b and a.b^T, both sides differentiable
      const NodeId c = t.constant(c_same1);
      return reduce(t, t.matmul_nt(t.matmul_tn(x, c), t.matmul_tn(c, x)));
    });
    check_gradient(random_tensor(n, m, rng), [&](Tape& t, NodeId x) {
      return reduce(t, t.add(x, t.constant(c_same1)));
    });
    check_gradient(random_tensor(n, m, rng), [&](Tape& t, NodeId x) {
      return reduce(t, t.sub(t.constant(c_same2), x));
    });
    check_gradient(random_tensor(n, m, rng), [&](Tape& t, NodeId x) {
      return reduce(t, t.mul(x, t.constant(c_same3)));
    });
    check_gradient(random_tensor(n, m, rng), [&](Tape& t, NodeId x) {
      return reduce(t, t.mask_mul(x, t.constant(c_same4)));
    });
    check_gradient(random_tensor(n, m, rng),
                   [&](Tape& t, NodeId x) { return reduce(t, t.scale(x, -1.7)); });
    check_gradient(random_tensor(n, m, rng), [&](Tape& t, NodeId x) {
      return reduce(t, t.smul(x, t.constant(Tensor::scalar(0.37))));
    });
    check_gradient(random_tensor(1, 1, rng), [&](Tape& t, NodeId s) {
      return reduce(t, t.smul(t.constant(c_big), s));
    });
    check_gradient(random_tensor(n, m, rng),
                   [&](Tape& t, NodeId x) { return reduce(t, t.row_softmax(x)); });
    check_gradient(random_tensor(n, m, rng, 0.5, 2.0),
                   [&](Tape& t, NodeId x) { return reduce(t, t.log(x)); });
    check_gradient(random_tensor(n, m, rng),
                   [&](Tape& t, NodeId x) { return reduce(t, t.exp(x)); });
    // Keep entries away from the relu kink so finite differences are valid.
    check_gradient(random_tensor(n, m, rng, 0.1, 1.0),
                   [&](Tape& t, NodeId x) { return reduce(t, t.relu(t.sub(x, t.constant(Tensor::full(n, m, 0.55))))); });
    check_gradient(random_tensor(n, m, rng, 0.5, 2.0),
                   [&](Tape& t, NodeId x) { return reduce(t, t.reciprocal(x)); });
    check_gradient(random_tensor(n, m, rng, 0.5, 2.0),
                   [&](Tape& t, NodeId x) { return reduce(t, t.rsqrt(x)); });
    check_gradient(random_tensor(n, m, rng),
                   [&](Tape& t, NodeId x) { return reduce(t, t.row_sum(x)); });
    check_gradient(random_tensor(n, m, rng),
                   [&](Tape& t, NodeId x) { return reduce(t, t.col_sum(x)); });
    check_gradient(random_tensor(n, m, rng),
                   [&](Tape& t, NodeId x) { return reduce(t, t.sum_all(x)); });
    check_gradient(random_tensor(n, m, rng),
                   [&](Tape& t, NodeId x) { return reduce(t, t.transpose(x)); });
    check_gradient(random_tensor(n, 1, rng),
                   [&](Tape& t, NodeId x) { return reduce(t, t.diag(x)); });
    check_gradient(random_tensor(n, n, rng),
                   [&](Tape& t, NodeId x) { return reduce(t, t.diag_part(x)); });

    std::vector<int> gather_idx;
    for (int i = 0; i < n + 1; ++i) gather_idx.push_back(static_cast<int>(rng.uniform(n)));
    check_gradient(random_tensor(n, m, rng), [&, gather_idx](Tape& t, NodeId x) {
      return reduce(t, t.gather_rows(x, make_indices(gather_idx)));
    });
    check_gradient(random_tensor(n, m, rng), [&, gather_idx](Tape& t, NodeId x) {
      std::vector<int> idx(gather_idx.begin(), gather_idx.begin() + n);
      return reduce(t, t.scatter_rows(x, make_indices(idx), n + 2));
    });
    std::vector<int> col_idx;
    for (int i = 0; i < n; ++i) col_idx.push_back(static_cast<int>(rng.uniform(m)));
    check_gradient(random_tensor(n, m, rng, 0.5, 2.0), [&, col_idx](Tape& t, NodeId x) {
      return reduce(t, t.select_cols(x, make_indices(col_idx)));
    });
    check_gradient(random_tensor(n, 1, rng), [&, col_idx](Tape& t, NodeId x) {
      return reduce(t, t.scatter_cols(x, make_indices(col_idx), m));
    });
    check_gradient(random_tensor(n, m, rng, 0.5, 2.0), [&, col_idx](Tape& t, NodeId x) {
      // row-stochastic rows so cross-entropy sees probabilities
      return t.cross_entropy(t.row_softmax(x), make_indices(col_idx));
    });
  }
}

TEST_CASE("second backward matches finite differences of first-gradient entries") {
  Rng rng(11);
  const Tensor at = random_tensor(3, 3, rng, 0.2, 1.2);
  // Composite with softmax and matmul so second-order terms are non-trivial.
  auto build = [](Tape& t, NodeId x) {
    const NodeId sm = t.row_softmax(t.matmul(x, t.transpose(x)));
    return t.sum_all(t.mul(sm, x));
  };

  Tape tape;
  const NodeId leaf = tape.leaf(at);
  const NodeId loss = build(tape, leaf);
  const NodeId wrt[1] = {leaf};
  const NodeId grad_node = tape.backward_nodes(loss, wrt).at(leaf);

  // d(sum of gradient entries)/dx, twice differentiable through the recorded
  // gradient graph.
  const NodeId grad_sum = tape.sum_all(grad_node);
  const Tensor second = tape.backward_values(grad_sum, wrt).at(leaf);

  const Tensor fd = finite_difference_gradient(
      [&](const Tensor& x) {
        Tape t2;
        const NodeId l2 = t2.leaf(x);
        const NodeId loss2 = build(t2, l2);
        const NodeId w2[1] = {l2};
        const Tensor g = t2.backward_values(loss2, w2).at(l2);
        double s = 0.0;
        for (double v : g.values()) s += v;
        return s;
      },
      at, 1e-5);
  CHECK(max_rel_err(second, fd, 1e-3) < 1e-4);
}

TEST_CASE("gradient linearity in the loss") {
  Rng rng(13);
  const Tensor at = random_tensor(4, 4, rng);
  Tape tape;
  const NodeId x = tape.leaf(at);
  const NodeId f1 = tape.sum_all(tape.mul(x, x));
  const NodeId f2 = tape.sum_all(tape.exp(tape.scale(x, 0.3)));
  const NodeId fsum = tape.add(f1, f2);
  const NodeId wrt[1] = {x};
  const Tensor g1 = tape.backward_values(f1, wrt).at(x);
  const Tensor g2 = tape.backward_values(f2, wrt).at(x);
  const Tensor gs = tape.backward_values(fsum, wrt).at(x);
  CHECK(gs.max_abs_diff(kernels::add(g1, g2)) < 1e-12);
}

TEST_CASE("unreachable leaves get zero gradients") {
  Tape tape;
  const NodeId x = tape.leaf(Tensor::scalar(2.0));
  const NodeId y = tape.leaf(Tensor::from({{1, 2}, {3, 4}}));
  const NodeId loss = tape.mul(x, x);
  const NodeId wrt[2] = {x, y};
  auto g = tape.backward_values(loss, wrt);
  CHECK(g.at(y).max_abs_diff(Tensor::zeros(2, 2)) == 0.0);
  CHECK(g.at(x).scalar_value() == 4.0);

  auto gn = tape.backward_nodes(loss, wrt);
  CHECK(tape.value(gn.at(y)).max_abs_diff(Tensor::zeros(2, 2)) == 0.0);
}

TEST_CASE("backward rejects non-scalar losses") {
  Tape tape;
  const NodeId x = tape.leaf(Tensor::from({{1, 2}}));
  const NodeId y = tape.mul(x, x);
  const NodeId wrt[1] = {x};
  CHECK_THROWS(tape.backward_values(y, wrt));
}

TEST_CASE("tape truncation reclaims nodes") {
  Tape tape;
  const NodeId x = tape.leaf(Tensor::scalar(1.5));
  const std::size_t mark = tape.size();
  tape.mul(x, x);
  tape.exp(x);
  CHECK(tape.size() == mark + 2);
  tape.truncate(mark);
  CHECK(tape.size() == mark);
  CHECK_THROWS(tape.truncate(mark + 1));
}

TEST_CASE("tape replay is bit-exact") {
  Rng rng(17);
  const Tensor a = random_tensor(4, 4, rng);
  auto run = [&](const Tensor& input) {
    Tape tape;
    const NodeId x = tape.leaf(input);
    const NodeId y = tape.row_softmax(tape.matmul(x, tape.transpose(x)));
    return tape.value(tape.sum_all(tape.mul(y, x))).scalar_value();
  };
  CHECK(run(a) == run(a));
}
