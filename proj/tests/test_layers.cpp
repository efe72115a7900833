#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "sldcnn/error.hpp"
#include "sldcnn/layers.hpp"
#include "sldcnn/rng.hpp"

using namespace sldcnn;

namespace {

ConvLayer random_conv(std::size_t f, std::size_t c, std::size_t k, Rng& rng) {
  return {random_uniform({f, c, k, k}, -1, 1, rng), random_uniform({f}, -1, 1, rng)};
}

}  // namespace

TEST_CASE("conv_forward constant field") {
  const Tensor in({1, 1, 3, 3}, std::vector<Real>(9, 1.0));
  const ConvLayer layer{Tensor({1, 1, 2, 2}, {1, 1, 1, 1}), Tensor({1}, {0})};
  const Tensor out = conv_forward(in, layer);
  CHECK(out.shape() == Shape{1, 1, 2, 2});
  for (Real v : out.values()) CHECK(v == 4.0);
}

TEST_CASE("conv_forward 1x1 filter is affine") {
  Rng rng(2);
  const Tensor in = random_uniform({2, 1, 4, 5}, -1, 1, rng);
  const ConvLayer layer{Tensor({1, 1, 1, 1}, {2.5}), Tensor({1}, {-0.75})};
  const Tensor out = conv_forward(in, layer);
  CHECK(out.shape() == in.shape());
  for (std::size_t e = 0; e < in.size(); ++e) CHECK(out[e] == doctest::Approx(2.5 * in[e] - 0.75));
}

TEST_CASE("conv_forward matches the direct-summation oracle") {
  Rng rng(13);
  const Tensor in = random_uniform({1, 2, 5, 5}, -1, 1, rng);
  const ConvLayer layer = random_conv(3, 2, 3, rng);
  CHECK(max_abs_diff(conv_forward(in, layer), oracle::conv_direct(in, layer.weights, layer.biases)) <
        1e-12);

  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t B = 1 + rng.below(3), C = 1 + rng.below(3), F = 1 + rng.below(3);
    const std::size_t H = 1 + rng.below(7), W = 1 + rng.below(7);
    const std::size_t K = 1 + rng.below(std::min(H, W));
    const Tensor x = random_uniform({B, C, H, W}, -1, 1, rng);
    const ConvLayer l = random_conv(F, C, K, rng);
    CHECK(max_abs_diff(conv_forward(x, l), oracle::conv_direct(x, l.weights, l.biases)) < 1e-12);
  }
}

TEST_CASE("conv_forward rejects bad shapes") {
  Rng rng(1);
  const ConvLayer layer = random_conv(2, 1, 3, rng);
  CHECK_THROWS_AS(conv_forward(Tensor({1, 1, 2, 5}), layer), ShapeError);
  CHECK_THROWS_AS(conv_forward(Tensor({1, 2, 5, 5}), layer), ShapeError);
  CHECK(conv_extent(5, 3) == 3);
  CHECK(conv_extent(2, 3) == 0);
}

TEST_CASE("conv_backward") {
  Rng rng(21);
  Tensor x = random_uniform({2, 2, 5, 4}, -1, 1, rng);
  ConvLayer layer = random_conv(3, 2, 2, rng);

  SUBCASE("zero upstream gradient") {
    const ParamGrads g = conv_backward(Tensor({2, 3, 4, 3}), x, layer);
    for (const Tensor* t : {&g.input, &g.weights, &g.biases})
      for (Real v : t->values()) CHECK(v == 0.0);
  }

  SUBCASE("1x1 filter weight gradient is a correlation sum") {
    const ConvLayer one{Tensor({1, 1, 1, 1}, {0.3}), Tensor({1}, {0})};
    const Tensor in = random_uniform({1, 1, 3, 3}, -1, 1, rng);
    const Tensor go = random_uniform({1, 1, 3, 3}, -1, 1, rng);
    const ParamGrads g = conv_backward(go, in, one);
    Real expect = 0;
    for (std::size_t e = 0; e < 9; ++e) expect += go[e] * in[e];
    CHECK(g.weights[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(g.biases[0] == doctest::Approx(sum(go)).epsilon(1e-12));
  }

  SUBCASE("finite differences") {
    const Tensor proj = random_uniform({2, 3, 4, 3}, -1, 1, rng);
    auto loss = [&] { return oracle::project(conv_forward(x, layer), proj); };
    const ParamGrads g = conv_backward(proj, x, layer);
    CHECK(oracle::max_rel_error(g.input, oracle::numeric_grad(x, loss)) < 1e-4);
    CHECK(oracle::max_rel_error(g.weights, oracle::numeric_grad(layer.weights, loss)) < 1e-4);
    CHECK(oracle::max_rel_error(g.biases, oracle::numeric_grad(layer.biases, loss)) < 1e-4);
  }

  CHECK_THROWS_AS(conv_backward(Tensor({2, 3, 3, 3}), x, layer), ShapeError);
}

TEST_CASE("maxpool_forward") {
  SUBCASE("ties pick the first cell") {
    const Tensor in({1, 1, 4, 4}, std::vector<Real>(16, 3.0));
    const PoolResult r = maxpool_forward(in, {2, 2});
    for (Real v : r.output.values()) CHECK(v == 3.0);
    CHECK(r.argmax == std::vector<std::size_t>{0, 2, 8, 10});
  }
  SUBCASE("row-major ramp") {
    std::vector<Real> v(16);
    std::iota(v.begin(), v.end(), 1.0);
    const PoolResult r = maxpool_forward(Tensor({1, 1, 4, 4}, v), {2, 2});
    CHECK(r.output == Tensor({1, 1, 2, 2}, {6, 8, 14, 16}));
  }
  SUBCASE("overlapping windows and dropped edges") {
    CHECK(pool_extent(10, 4, 2) == 4);
    CHECK(pool_extent(67, 4, 2) == 32);
    CHECK(pool_extent(29, 4, 2) == 13);
    CHECK(pool_extent(3, 4, 2) == 0);
    Rng rng(6);
    const Tensor in = random_uniform({2, 3, 10, 9}, -1, 1, rng);
    const PoolResult r = maxpool_forward(in, {4, 2});
    CHECK(r.output.shape() == Shape{2, 3, 4, 3});
    CHECK(r.output == oracle::pool_direct(in, 4, 2));
  }
  CHECK_THROWS_AS(maxpool_forward(Tensor({1, 1, 3, 5}), {4, 2}), ShapeError);
}

TEST_CASE("maxpool_backward") {
  Rng rng(8);
  SUBCASE("disjoint windows conserve gradient mass") {
    const Tensor in = random_uniform({2, 2, 6, 6}, -1, 1, rng);
    const PoolResult r = maxpool_forward(in, {2, 2});
    const Tensor go = random_uniform(r.output.shape(), -1, 1, rng);
    CHECK(sum(maxpool_backward(go, r.argmax, in.shape())) == sum(go));
    const Tensor zero = maxpool_backward(Tensor(r.output.shape()), r.argmax, in.shape());
    for (Real v : zero.values()) CHECK(v == 0.0);
  }
  SUBCASE("overlapping windows match finite differences") {
    Tensor in = random_uniform({1, 2, 8, 8}, -1, 1, rng);
    const MaxPoolLayer layer{4, 2};
    const PoolResult r = maxpool_forward(in, layer);
    const Tensor proj = random_uniform(r.output.shape(), -1, 1, rng);
    auto loss = [&] { return oracle::project(maxpool_forward(in, layer).output, proj); };
    const Tensor g = maxpool_backward(proj, r.argmax, in.shape());
    CHECK(oracle::max_rel_error(g, oracle::numeric_grad(in, loss)) < 1e-4);
  }
  SUBCASE("bad index") {
    const std::vector<std::size_t> bad{99};
    CHECK_THROWS_AS(maxpool_backward(Tensor({1, 1, 1, 1}), bad, {1, 1, 2, 2}), InternalError);
  }
}

TEST_CASE("relu") {
  const Tensor x({3}, {-1, 0, 2});
  CHECK(relu(x) == Tensor({3}, {0, 0, 2}));
  CHECK(relu_backward(Tensor({3}, {5, 5, 5}), x) == Tensor({3}, {0, 0, 5}));

  Rng rng(4);
  const Tensor r = random_uniform({20}, -3, 3, rng);
  const Tensor total = add(relu(r), relu(scale(r, -1)));
  for (std::size_t e = 0; e < r.size(); ++e) CHECK(total[e] == std::abs(r[e]));

  CHECK_THROWS_AS(relu(Tensor({2}, {1, NAN})), NumericError);
  CHECK_THROWS_AS(relu(Tensor({2}, {INFINITY, 1})), NumericError);
}

TEST_CASE("fc layer") {
  SUBCASE("identity weights") {
    Rng rng(3);
    const Tensor x = random_uniform({4, 3}, -1, 1, rng);
    CHECK(fc_forward(x, {identity(3), Tensor({3})}) == x);
  }
  SUBCASE("hand arithmetic") {
    const FCLayer l{Tensor({3, 2}, {1, 0, 0, 1, 1, 1}), Tensor({3}, {0, 0, 1})};
    CHECK(fc_forward(Tensor({1, 2}, {1, 2}), l) == Tensor({1, 3}, {1, 2, 4}));
  }
  SUBCASE("finite differences") {
    Rng rng(17);
    Tensor x = random_uniform({3, 5}, -1, 1, rng);
    FCLayer l{random_uniform({4, 5}, -1, 1, rng), random_uniform({4}, -1, 1, rng)};
    const Tensor proj = random_uniform({3, 4}, -1, 1, rng);
    auto loss = [&] { return oracle::project(fc_forward(x, l), proj); };
    const ParamGrads g = fc_backward(proj, x, l);
    CHECK(oracle::max_rel_error(g.input, oracle::numeric_grad(x, loss)) < 1e-4);
    CHECK(oracle::max_rel_error(g.weights, oracle::numeric_grad(l.weights, loss)) < 1e-4);
    CHECK(oracle::max_rel_error(g.biases, oracle::numeric_grad(l.biases, loss)) < 1e-4);
  }
  CHECK_THROWS_AS(fc_forward(Tensor({1, 3}), {identity(2), Tensor({2})}), ShapeError);
}

TEST_CASE("softmax logits layer gradients") {
  Rng rng(23);
  Tensor x = random_uniform({2, 6}, -1, 1, rng);
  SoftmaxLayer l{random_uniform({3, 6}, -1, 1, rng), random_uniform({3}, -1, 1, rng)};
  const Tensor proj = random_uniform({2, 3}, -1, 1, rng);
  auto loss = [&] { return oracle::project(softmax_logits(x, l), proj); };
  const ParamGrads g = softmax_logits_backward(proj, x, l);
  CHECK(oracle::max_rel_error(g.input, oracle::numeric_grad(x, loss)) < 1e-4);
  CHECK(oracle::max_rel_error(g.weights, oracle::numeric_grad(l.weights, loss)) < 1e-4);
}

TEST_CASE("softmax_xent") {
  SUBCASE("uniform logits") {
    const std::vector<int> labels{0, 3};
    const SoftmaxResult r = softmax_xent(Tensor({2, 4}), labels);
    for (Real p : r.probs.values()) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  }
  SUBCASE("rows sum to one at large magnitude") {
    Rng rng(12);
    Tensor z = random_uniform({4, 6}, -1000, 1000, rng);
    z[3] = 1000;
    z[7] = -1000;
    const std::vector<int> labels{0, 1, 2, 5};
    const SoftmaxResult r = softmax_xent(z, labels);
    CHECK(std::isfinite(r.loss));
    CHECK(r.loss >= 0);
    for (std::size_t b = 0; b < 4; ++b) {
      Real s = 0;
      for (std::size_t k = 0; k < 6; ++k) s += r.probs[b * 6 + k];
      CHECK(std::abs(s - 1) <= 1e-12);
    }
  }
  SUBCASE("gradient matches finite differences") {
    Rng rng(31);
    Tensor z = random_uniform({3, 5}, -2, 2, rng);
    const std::vector<int> labels{4, 0, 2};
    const SoftmaxResult r = softmax_xent(z, labels);
    auto loss = [&] { return softmax_xent(z, labels).loss; };
    CHECK(oracle::max_rel_error(r.grad_logits, oracle::numeric_grad(z, loss)) < 1e-4);
  }
  SUBCASE("explicit normalizer") {
    const std::vector<int> labels{1};
    const SoftmaxResult whole = softmax_xent(Tensor({1, 3}), labels);
    const SoftmaxResult part = softmax_xent(Tensor({1, 3}), labels, 4);
    CHECK(part.loss == doctest::Approx(whole.loss / 4));
  }
  const std::vector<int> bad{4};
  CHECK_THROWS_AS(softmax_xent(Tensor({1, 4}), bad), LabelError);
  const std::vector<int> neg{-1};
  CHECK_THROWS_AS(softmax_xent(Tensor({1, 4}), neg), LabelError);
}
