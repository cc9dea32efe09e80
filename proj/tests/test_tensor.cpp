#include <cmath>
#include <random>

#include "avwnet/loss.hpp"
#include "avwnet/model.hpp"
#include "avwnet/ops.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace avwnet;
using oracle::grad_check;
using oracle::random_tensor;

namespace {

// Cross-correlation by nested loops, zero padding, stride 1.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int pad) {
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto O = w.dim(0), k = w.dim(2);
  const auto Ho = H + 2 * pad - k + 1, Wo = W + 2 * pad - k + 1;
  std::vector<double> out(static_cast<std::size_t>(N * O * Ho * Wo));
  const auto xv = x.values(), wv = w.values(), bv = b.values();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t o = 0; o < O; ++o)
      for (std::int64_t i = 0; i < Ho; ++i)
        for (std::int64_t j = 0; j < Wo; ++j) {
          double s = bv[o];
          for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t u = 0; u < k; ++u)
              for (std::int64_t v = 0; v < k; ++v) {
                const auto y = i + u - pad, z = j + v - pad;
                if (y < 0 || z < 0 || y >= H || z >= W) continue;
                s += xv[((n * C + c) * H + y) * W + z] * wv[((o * C + c) * k + u) * k + v];
              }
          out[((n * O + o) * Ho + i) * Wo + j] = s;
        }
  return out;
}

}  // namespace

TEST_CASE("conv2d with a 1x1 unit kernel is the identity") {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({2, 1, 5, 3}, rng, false);
  const Tensor y = conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0), Tensor::zeros({1}), 0);
  CHECK(y.shape() == x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("conv2d all-ones 3x3 on a constant image counts the in-bounds taps") {
  const Tensor x = Tensor::full({1, 1, 5, 6}, 1.0);
  const Tensor y = conv2d(x, Tensor::full({1, 1, 3, 3}, 1.0), Tensor::zeros({1}), 1);
  const auto v = y.values();
  auto at = [&](int r, int c) { return v[r * 6 + c]; };
  CHECK(at(2, 2) == 9);
  CHECK(at(0, 3) == 6);
  CHECK(at(2, 0) == 6);
  CHECK(at(0, 0) == 4);
  CHECK(at(4, 5) == 4);
  CHECK(naive_conv(x, Tensor::full({1, 1, 3, 3}, 1.0), Tensor::zeros({1}), 1) ==
        std::vector<double>(v.begin(), v.end()));
}

TEST_CASE("conv2d matches the nested-loop oracle on random data") {
  std::mt19937_64 rng(2);
  for (int pad : {0, 1}) {
    const Tensor x = random_tensor({2, 3, 6, 5}, rng, false);
    const Tensor w = random_tensor({4, 3, 3, 3}, rng, false);
    const Tensor b = random_tensor({4}, rng, false);
    const Tensor y = conv2d(x, w, b, pad);
    const auto ref = naive_conv(x, w, b, pad);
    REQUIRE(static_cast<std::size_t>(y.numel()) == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.values()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d shape contract and errors") {
  const Tensor x = Tensor::zeros({1, 2, 4, 4});
  CHECK(conv2d(x, Tensor::zeros({3, 2, 3, 3}), Tensor::zeros({3}), 1).shape() == Shape{1, 3, 4, 4});
  CHECK(conv2d(x, Tensor::zeros({3, 2, 3, 3}), Tensor::zeros({3}), 1, 2).shape() ==
        Shape{1, 3, 2, 2});
  CHECK_THROWS_AS(conv2d(x, Tensor::zeros({3, 1, 3, 3}), Tensor::zeros({3}), 1), ShapeError);
  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 2, 2, 2}), Tensor::zeros({1, 2, 5, 5}),
                         Tensor::zeros({1}), 0),
                  ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor::zeros({1, 2, 2, 2}), Tensor::zeros({1}), 0), ShapeError);
}

TEST_CASE("max_pool2d values, tie-break and errors") {
  const Tensor block = Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4}, true);
  CHECK(max_pool2d(block).item() == 4);

  const Tensor c = Tensor::full({1, 2, 4, 4}, 3.0, true);
  const Tensor p = max_pool2d(c);
  for (double v : p.values()) CHECK(v == 3.0);
  sum(p).backward();
  const auto g = c.grad();
  for (std::int64_t ch = 0; ch < 2; ++ch)
    for (int r = 0; r < 4; ++r)
      for (int col = 0; col < 4; ++col) {
        const double expect = (r % 2 == 0 && col % 2 == 0) ? 1.0 : 0.0;
        CHECK(g[static_cast<std::size_t>(ch * 16 + r * 4 + col)] == expect);
      }

  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({1, 1, 8, 8}, rng, false);
  const auto v = x.values();
  const Tensor pooled = max_pool2d(x);
  const auto y = pooled.values();
  for (int r = 0; r < 4; ++r)
    for (int col = 0; col < 4; ++col) {
      double m = -1e300;
      for (int u = 0; u < 2; ++u)
        for (int w = 0; w < 2; ++w) m = std::max(m, v[(2 * r + u) * 8 + 2 * col + w]);
      CHECK(y[r * 4 + col] == m);
    }
  CHECK_THROWS_AS(max_pool2d(Tensor::zeros({1, 1, 3, 4})), ShapeError);
}

TEST_CASE("upsample_nearest replicates and sums gradients") {
  const Tensor one = Tensor::from_values({1, 1, 1, 1}, {1}, true);
  const Tensor up = upsample_nearest(one);
  CHECK(up.shape() == Shape{1, 1, 2, 2});
  for (double v : up.values()) CHECK(v == 1.0);

  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({2, 3, 3, 5}, rng);
  const Tensor back = avg_pool2d(upsample_nearest(x));
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(back.values()[i] == x.values()[i]);

  sum(upsample_nearest(x)).backward();
  for (double g : x.grad()) CHECK(g == 4.0);
  const auto fd = grad_check([&] { return sum(upsample_nearest(x)); }, {x});
  CHECK(fd.max_rel < 1e-8);
}

TEST_CASE("batch_norm normalisation, degenerate variance and eval mode") {
  // Two values per channel at -1 and +1: mean 0, biased variance 1.
  const Tensor x = Tensor::from_values({2, 1, 1, 1}, {-1, 1});
  BatchNormStats stats = BatchNormStats::initial(1);
  const Tensor y = batch_norm(x, Tensor::full({1}, 1.0), Tensor::zeros({1}), stats,
                              BatchNormMode::train);
  CHECK(y.values()[0] == doctest::Approx(-1 / std::sqrt(1 + 1e-5)).epsilon(1e-12));
  CHECK(y.values()[1] == doctest::Approx(1 / std::sqrt(1 + 1e-5)).epsilon(1e-12));
  // momentum 0.1 toward mean 0 and unbiased variance 2
  CHECK(stats.running_mean[0] == doctest::Approx(0.0));
  CHECK(stats.running_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0));

  const Tensor c = Tensor::full({2, 2, 3, 3}, 5.0);
  BatchNormStats s2 = BatchNormStats::initial(2);
  const Tensor beta = Tensor::from_values({2}, {0.25, -0.5});
  const Tensor yc = batch_norm(c, Tensor::full({2}, 1.0), beta, s2, BatchNormMode::train);
  for (std::int64_t i = 0; i < yc.numel(); ++i) {
    CHECK(yc.values()[i] == doctest::Approx((i / 9) % 2 == 0 ? 0.25 : -0.5));
  }

  BatchNormStats known{{1.0}, {4.0}};
  const Tensor e = batch_norm(Tensor::full({1, 1, 2, 2}, 3.0), Tensor::full({1}, 2.0),
                              Tensor::full({1}, 1.0), known, BatchNormMode::eval);
  CHECK(e.values()[0] == doctest::Approx(2.0 * 2.0 / std::sqrt(4.0 + 1e-5) + 1.0));

  BatchNormStats empty;
  CHECK_THROWS_AS(batch_norm(c, Tensor::full({2}, 1.0), beta, empty, BatchNormMode::eval),
                  GraphError);
}

TEST_CASE("batch_norm gradient against central differences") {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({2, 3, 4, 4}, rng);
  const Tensor gamma = random_tensor({3}, rng, true, 0.5, 1.5);
  const Tensor beta = random_tensor({3}, rng);
  const Tensor w = random_tensor({2, 3, 4, 4}, rng, false);
  BatchNormStats stats = BatchNormStats::initial(3);
  auto f = [&] {
    return oracle::probe_loss(batch_norm(x, gamma, beta, stats, BatchNormMode::train), w);
  };
  const auto r = grad_check(f, {x, gamma, beta});
  INFO(r.worst);
  CHECK(r.max_rel < 1e-5);
}

TEST_CASE("elementwise operations") {
  const Tensor x = Tensor::from_values({1, 1, 1, 2}, {-1, 2});
  CHECK(relu(x).values()[0] == 0);
  CHECK(relu(x).values()[1] == 2);
  CHECK(sigmoid(Tensor::scalar(0)).item() == 0.5);
  const Tensor big = Tensor::from_values({2}, {-1000, 1000});
  CHECK(sigmoid(big).all_finite());
  CHECK(sigmoid(big).values()[0] == doctest::Approx(0.0));
  CHECK(sigmoid(big).values()[1] == 1.0);

  std::mt19937_64 rng(6);
  const Tensor a = random_tensor({1, 2, 3, 3}, rng);
  const Tensor b = random_tensor({1, 2, 3, 3}, rng);
  const auto r = grad_check([&] { return sum(a * b); }, {a, b});
  CHECK(r.max_rel < 1e-6);

  const Tensor row = random_tensor({1, 1, 3, 3}, rng);
  CHECK((a + row).shape() == a.shape());
  CHECK((a * row).values()[9] == doctest::Approx(a.values()[9] * row.values()[0]));
  CHECK_THROWS_AS(add(a, Tensor::zeros({1, 3, 3, 3})), ShapeError);
  CHECK_THROWS_AS(mul(a, Tensor::zeros({2, 3, 3})), ShapeError);
}

TEST_CASE("concat_channels and slice_channels") {
  const Tensor a = Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4}, true);
  const Tensor b = Tensor::from_values({1, 1, 2, 2}, {5, 6, 7, 8}, true);
  const Tensor c = concat_channels(a, b);
  CHECK(c.shape() == Shape{1, 2, 2, 2});
  const Tensor a2 = slice_channels(c, 0, 1), b2 = slice_channels(c, 1, 1);
  for (int i = 0; i < 4; ++i) {
    CHECK(a2.values()[i] == a.values()[i]);
    CHECK(b2.values()[i] == b.values()[i]);
  }
  sum(c).backward();
  for (double g : a.grad()) CHECK(g == 1.0);
  for (double g : b.grad()) CHECK(g == 1.0);
  CHECK(grad_check([&] { return sum(concat_channels(a, b)); }, {a, b}).max_rel < 1e-8);
  CHECK_THROWS_AS(concat_channels(a, Tensor::zeros({1, 1, 2, 3})), ShapeError);
}

TEST_CASE("backward semantics") {
  std::mt19937_64 rng(7);
  Tensor w = random_tensor({3, 4}, rng);
  sum(w).backward();
  for (double g : w.grad()) CHECK(g == 1.0);

  w.zero_grad();
  sum(w * w).backward();
  for (std::int64_t i = 0; i < w.numel(); ++i) CHECK(w.grad()[i] == 2 * w.values()[i]);

  CHECK_THROWS_AS((w * w).backward(), ShapeError);
  CHECK_THROWS_AS(sum(w.detach()).backward(), GraphError);
  const Tensor loss = sum(w * w);
  loss.backward();
  CHECK_THROWS_AS(loss.backward(), GraphError);
}

TEST_CASE("every primitive passes a central-difference check") {
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor({2, 2, 4, 6}, rng);
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  auto probe = [&](Shape s) { return random_tensor(std::move(s), rng, false); };

  const Tensor pc = probe({2, 3, 4, 6});
  CHECK(grad_check([&] { return oracle::probe_loss(conv2d(x, w, b, 1), pc); }, {x, w, b}).max_rel <
        1e-4);
  const Tensor ps = probe({2, 3, 2, 3});
  CHECK(grad_check([&] { return oracle::probe_loss(conv2d(x, w, b, 1, 2), ps); }, {x, w, b})
            .max_rel < 1e-4);
  const Tensor pp = probe({2, 2, 2, 3});
  CHECK(grad_check([&] { return oracle::probe_loss(max_pool2d(x), pp); }, {x}).max_rel < 1e-4);
  CHECK(grad_check([&] { return oracle::probe_loss(avg_pool2d(x), pp); }, {x}).max_rel < 1e-4);
  const Tensor pu = probe({2, 2, 8, 12});
  CHECK(grad_check([&] { return oracle::probe_loss(upsample_nearest(x), pu); }, {x}).max_rel <
        1e-4);
  const Tensor px = probe({2, 2, 4, 6});
  CHECK(grad_check([&] { return oracle::probe_loss(relu(x), px); }, {x}).max_rel < 1e-4);
  CHECK(grad_check([&] { return oracle::probe_loss(sigmoid(x), px); }, {x}).max_rel < 1e-4);
  CHECK(grad_check([&] { return oracle::probe_loss(scale(x, -1.7), px); }, {x}).max_rel < 1e-4);
  const Tensor g = random_tensor({2, 1, 4, 1}, rng);
  CHECK(grad_check([&] { return oracle::probe_loss(add(x, g), px); }, {x, g}).max_rel < 1e-4);
  CHECK(grad_check([&] { return oracle::probe_loss(mul(x, g), px); }, {x, g}).max_rel < 1e-4);
  const Tensor pcat = probe({2, 4, 4, 6});
  CHECK(grad_check([&] { return oracle::probe_loss(concat_channels(x, x * x), pcat); }, {x})
            .max_rel < 1e-4);
  const Tensor psl = probe({2, 1, 4, 6});
  CHECK(grad_check([&] { return oracle::probe_loss(slice_channels(x, 1, 1), psl); }, {x})
            .max_rel < 1e-4);
  CHECK(grad_check([&] { return mean(x * x); }, {x}).max_rel < 1e-4);
}

TEST_CASE("full phi(2,2) W-Net gradient over all parameters") {
  UNetConfig block;
  block.depth = 2;
  block.base_filters = 2;
  WNetModel model(WNetConfig::from_block(block), PreprocessConfig{}, 11);
  std::mt19937_64 rng(12);
  const Tensor x = random_tensor({1, 3, 8, 8}, rng, false, -2, 2);
  std::vector<double> t(64), wt(64, 0.8);
  for (auto& v : t) v = rng() % 2;
  const Tensor target = Tensor::from_values({1, 1, 8, 8}, t);
  const Tensor weight = Tensor::from_values({1, 1, 8, 8}, wt);
  auto loss = [&] {
    const WNetOutput out = model.forward(x, BatchNormMode::train);
    return add(focal_loss(out.second.probability, target, weight, Tensor(), 2.0),
               focal_loss(out.first.probability, target, weight, Tensor(), 2.0));
  };
  const auto r = grad_check(loss, model.parameters());
  INFO(r.worst);
  CHECK(r.checked == static_cast<std::size_t>(model.parameter_count()));
  CHECK(r.max_rel < 1e-4);
}

TEST_CASE("encoder then decoder restores the spatial shape") {
  std::mt19937_64 rng(13);
  for (int k : {1, 2, 3}) {
    for (auto [h, w] : {std::pair{8, 8}, std::pair{16, 24}, std::pair{32, 8}}) {
      Tensor t = random_tensor({1, 1, h, w}, rng, false);
      for (int i = 0; i < k; ++i) t = max_pool2d(t);
      for (int i = 0; i < k; ++i) t = upsample_nearest(t);
      CHECK(t.shape() == Shape{1, 1, h, w});
    }
  }
}

TEST_CASE("identical seeds give bit-identical values and gradients") {
  auto run = [] {
    std::mt19937_64 rng(14);
    const Tensor x = random_tensor({2, 2, 4, 4}, rng);
    const Tensor w = random_tensor({2, 2, 3, 3}, rng);
    const Tensor b = random_tensor({2}, rng);
    const Tensor y = sigmoid(conv2d(relu(x), w, b, 1));
    sum(y * y).backward();
    std::vector<double> out(y.values().begin(), y.values().end());
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("backward is linear in the loss") {
  std::mt19937_64 rng(15);
  Tensor x = random_tensor({1, 2, 4, 4}, rng);
  const Tensor w = random_tensor({1, 2, 3, 3}, rng);
  const Tensor b = Tensor::zeros({1}, true);
  auto l1 = [&] { return sum(sigmoid(conv2d(x, w, b, 1))); };
  auto l2 = [&] { return mean(x * x); };
  auto grads = [&](const Tensor& loss) {
    x.zero_grad();
    loss.backward();
    return std::vector<double>(x.grad().begin(), x.grad().end());
  };
  const auto g1 = grads(l1());
  const auto g2 = grads(l2());
  const double a = 0.7, c = -2.5;
  const auto g = grads(add(scale(l1(), a), scale(l2(), c)));
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g[i] == doctest::Approx(a * g1[i] + c * g2[i]).epsilon(1e-12));
  }
}
