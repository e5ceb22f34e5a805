#include "effseg/layers.hpp"
#include "effseg/loss.hpp"
#include "effseg/optim.hpp"
#include "gradchecks.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace effseg;

namespace {

Vector<float> zeros(Index n) { return Vector<float>::Zero(n); }

bool bit_equal(const Tensorf& a, const Tensorf& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), sizeof(float) * a.size()) == 0;
}

}  // namespace

TEST_CASE("conv2d identity kernel reproduces the input") {
  std::mt19937_64 rng(1);
  const Tensorf x = oracle::random_tensor<float>({2, 1, 6, 7}, rng);
  Tensorf k(1, 1, 3, 3);
  k(0, 0, 1, 1) = 1.0f;
  const Tensorf y = conv2d(x, k, zeros(1), 1, 1);
  CHECK(bit_equal(x, y));
}

TEST_CASE("conv2d of a single impulse with an all-ones kernel") {
  Tensorf x(1, 1, 4, 4);
  x(0, 0, 1, 1) = 1.0f;
  const Tensorf k = Tensorf::constant({1, 1, 3, 3}, 1.0f);
  const Tensorf y = conv2d(x, k, zeros(1), 1, 1);
  const Tensorf expect = oracle::naive_conv2d(x, k, std::vector<float>{0.0f}, 1, 1);
  CHECK(bit_equal(y, expect));
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 4; ++c) CHECK(y(0, 0, r, c) == ((r <= 2 && c <= 2) ? 1.0f : 0.0f));
}

TEST_CASE("conv2d output dims") {
  const Tensorf x(2, 3, 64, 64);
  const Tensorf k(8, 3, 3, 3);
  CHECK(conv2d(x, k, zeros(8), 2, 1).shape() == Shape{2, 8, 32, 32});
  CHECK_THROWS_AS(conv2d(x, Tensorf(8, 2, 3, 3), zeros(8), 1, 1), ShapeError);
  CHECK_THROWS_AS(conv2d(x, k, zeros(7), 1, 1), ShapeError);
}

TEST_CASE("conv2d agrees exactly with the direct-summation oracle") {
  std::mt19937_64 rng(7);
  struct Case {
    Shape in, k;
    Index stride, pad;
  };
  const Case cases[] = {{{2, 3, 8, 8}, {4, 3, 3, 3}, 1, 1}, {{2, 3, 8, 8}, {5, 3, 3, 3}, 2, 1},
                        {{1, 3, 8, 7}, {2, 3, 1, 1}, 1, 0}, {{2, 2, 7, 8}, {3, 2, 3, 3}, 1, 0},
                        {{1, 1, 1, 1}, {1, 1, 3, 3}, 1, 1}, {{2, 3, 5, 6}, {2, 3, 3, 3}, 2, 0}};
  for (const auto& c : cases) {
    for (int rep = 0; rep < 5; ++rep) {
      // small integers keep every partial sum exactly representable
      Tensorf x(c.in), k(c.k);
      std::uniform_int_distribution<int> u(-4, 4);
      for (auto& v : x.data()) v = float(u(rng));
      for (auto& v : k.data()) v = float(u(rng));
      std::vector<float> b(std::size_t(c.k.n));
      for (auto& v : b) v = float(u(rng));
      const Tensorf y = conv2d(x, k, Eigen::Map<const Vector<float>>(b.data(), c.k.n), c.stride, c.pad);
      CHECK(bit_equal(y, oracle::naive_conv2d(x, k, b, c.stride, c.pad)));
    }
  }
  // random real values: agreement up to summation order
  for (const auto& c : cases) {
    const Tensord x = oracle::random_tensor<double>(c.in, rng);
    const Tensord k = oracle::random_tensor<double>(c.k, rng);
    std::vector<double> b(std::size_t(c.k.n), 0.25);
    const Tensord y = conv2d(x, k, Eigen::Map<const Vector<double>>(b.data(), c.k.n), c.stride, c.pad);
    CHECK((y.data() - oracle::naive_conv2d(x, k, b, c.stride, c.pad).data()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("conv2d_backward basic contracts") {
  std::mt19937_64 rng(3);
  const Tensorf x = oracle::random_tensor<float>({1, 2, 5, 5}, rng);
  const Tensorf k = oracle::random_tensor<float>({3, 2, 3, 3}, rng);
  Conv2dCache<float> cache;
  const Tensorf y = conv2d(x, k, zeros(3), 1, 1, &cache);

  const auto zero = conv2d_backward(Tensorf(y.shape()), cache, k);
  CHECK(zero.input.data().isZero(0));
  CHECK(zero.kernel.data().isZero(0));
  CHECK(zero.bias.isZero(0));

  Tensorf id(1, 1, 3, 3);
  id(0, 0, 1, 1) = 1.0f;
  Conv2dCache<float> c2;
  const Tensorf xi = oracle::random_tensor<float>({1, 1, 5, 5}, rng);
  conv2d(xi, id, zeros(1), 1, 1, &c2);
  const Tensorf up = oracle::random_tensor<float>({1, 1, 5, 5}, rng);
  CHECK(bit_equal(conv2d_backward(up, c2, id).input, up));

  CHECK_THROWS_AS(conv2d_backward(y, Conv2dCache<float>{}, k), std::logic_error);
}

TEST_CASE("leaky_relu values and derivative") {
  Tensorf x(1, 1, 1, 3);
  x.data() << 2.0f, -1.0f, 0.0f;
  const Tensorf y = leaky_relu(x, 0.01f);
  CHECK(y.data()[0] == 2.0f);
  CHECK(y.data()[1] == doctest::Approx(-0.01f));
  CHECK(y.data()[2] == 0.0f);
  const Tensorf g = leaky_relu_backward(Tensorf::constant(x.shape(), 1.0f), x, 0.01f);
  CHECK(g.data()[0] == 1.0f);
  CHECK(g.data()[1] == doctest::Approx(0.01f));
}

TEST_CASE("instance_norm examples") {
  const Tensorf c = Tensorf::constant({1, 2, 3, 3}, 5.0f);
  CHECK(instance_norm(c, 1e-5f).data().isZero(1e-6));

  Tensord x(1, 1, 1, 2);
  x.data() << 1.0, 3.0;
  const Tensord y = instance_norm(x, 1e-5);
  CHECK(y.shape() == x.shape());
  CHECK(y.data()[0] == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-12));
  CHECK(y.data()[1] == doctest::Approx(1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-12));
}

TEST_CASE("upsample2x replicates and its adjoint sums blocks") {
  Tensorf x(1, 1, 2, 2);
  x.data() << 1, 2, 3, 4;
  const Tensorf y = upsample2x(x);
  REQUIRE(y.shape() == Shape{1, 1, 4, 4});
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 4; ++c) CHECK(y(0, 0, r, c) == x(0, 0, r / 2, c / 2));
  Tensorf up(1, 1, 4, 4);
  up(0, 0, 2, 2) = 1;
  up(0, 0, 2, 3) = 2;
  up(0, 0, 3, 2) = 3;
  up(0, 0, 3, 3) = 4;
  const Tensorf g = upsample2x_backward(up);
  CHECK(g(0, 0, 1, 1) == 10.0f);
  CHECK(g.data().sum() == 10.0f);
}

TEST_CASE("softmax_channel examples") {
  Tensord z(1, 2, 1, 2);
  z(0, 0, 0, 0) = 0;
  z(0, 1, 0, 0) = 0;
  z(0, 0, 0, 1) = std::log(2.0);
  z(0, 1, 0, 1) = 0;
  const Tensord p = softmax_channel(z);
  CHECK(p(0, 0, 0, 0) == doctest::Approx(0.5));
  CHECK(p(0, 1, 0, 0) == doctest::Approx(0.5));
  CHECK(p(0, 0, 0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(p(0, 1, 0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  std::mt19937_64 rng(5);
  const Tensord big = oracle::random_tensor<double>({2, 3, 4, 4}, rng, -800.0, 800.0);
  const Tensord q = softmax_channel(big);
  CHECK(q.allFinite());
  for (Index n = 0; n < 2; ++n)
    for (Index i = 0; i < 16; ++i) {
      double s = 0;
      for (Index c = 0; c < 3; ++c) s += q.plane(n, c).data()[i];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("sgd_nesterov_step examples") {
  std::vector<Tensorf> params{Tensorf::constant({1, 1, 1, 1}, 1.0f)};
  std::vector<Tensorf> grads{Tensorf::constant({1, 1, 1, 1}, 1.0f)};
  OptimizerState<float> st(params, 0.99f, 0.01f);
  REQUIRE(st.velocity.size() == 1);
  CHECK(st.velocity[0].isZero(0));
  sgd_nesterov_step(params, grads, st);
  CHECK(st.velocity[0][0] == doctest::Approx(1.0));
  CHECK(params[0].data()[0] == doctest::Approx(0.9801).epsilon(1e-6));

  std::vector<Tensorf> p2{Tensorf::constant({1, 1, 2, 2}, 3.0f)};
  OptimizerState<float> st2(p2, 0.99f, 0.01f);
  sgd_nesterov_step(p2, {Tensorf(p2[0].shape())}, st2);
  CHECK((p2[0].data().array() == 3.0f).all());

  OptimizerState<float> st3(p2, 0.9f, 0.0f);
  sgd_nesterov_step(p2, {Tensorf::constant(p2[0].shape(), 2.0f)}, st3);
  CHECK((p2[0].data().array() == 3.0f).all());
  CHECK((st3.velocity[0].array() == 2.0f).all());

  CHECK_THROWS_AS(sgd_nesterov_step(p2, {Tensorf(1, 1, 3, 3)}, st3), ShapeError);
}

TEST_CASE("layer gradients match central finite differences") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    for (const auto& r : gradcheck::layer_checks(seed)) {
      INFO(r.name << " seed " << seed << " rel error " << r.rel_error);
      CHECK(r.rel_error <= 1e-6);
    }
  }
}

TEST_CASE("operations are pure") {
  std::mt19937_64 rng(9);
  const Tensorf x = oracle::random_tensor<float>({2, 3, 8, 8}, rng);
  const Tensorf k = oracle::random_tensor<float>({4, 3, 3, 3}, rng);
  const Vector<float> b = Vector<float>::LinSpaced(4, -1, 1);
  CHECK(bit_equal(conv2d(x, k, b, 1, 1), conv2d(x, k, b, 1, 1)));
  CHECK(bit_equal(conv2d(x, k, b, 2, 1), conv2d(x, k, b, 2, 1)));
  CHECK(bit_equal(instance_norm(x, 1e-5f), instance_norm(x, 1e-5f)));
  CHECK(bit_equal(leaky_relu(x, 0.01f), leaky_relu(x, 0.01f)));
  CHECK(bit_equal(softmax_channel(x), softmax_channel(x)));
  CHECK(bit_equal(upsample2x(x), upsample2x(x)));
  const Tensorf copy = x;
  conv2d(x, k, b, 1, 1);
  CHECK(bit_equal(copy, x));
}

TEST_CASE("forward and backward outputs stay finite") {
  std::mt19937_64 rng(21);
  const Tensorf x = oracle::random_tensor<float>({2, 2, 6, 6}, rng, -50.0, 50.0);
  InstanceNormCache<float> cache;
  const Tensorf y = instance_norm(x, 1e-5f, &cache);
  CHECK(y.allFinite());
  CHECK(instance_norm_backward(oracle::random_tensor<float>(y.shape(), rng), cache).allFinite());
  Tensorf t(2, 1, 6, 6);
  const auto loss = dice_ce_loss(x, t);
  CHECK(std::isfinite(loss.loss));
  CHECK(loss.grad.allFinite());
}
