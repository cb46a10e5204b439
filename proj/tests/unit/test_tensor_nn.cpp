#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "evoroc/layers.hpp"
#include "evoroc/model.hpp"
#include "evoroc/trainer.hpp"
#include "test_util.hpp"

namespace evoroc {
namespace {

using test::contract;
using test::fd_check;
using test::random_tensor;

ConvLayerParams conv_layer(std::size_t out, std::size_t in, std::size_t k, std::vector<float> w,
                           std::vector<float> b) {
  return {Tensor({out, in, k, k}, std::move(w)), Tensor({out}, std::move(b))};
}

TEST(Conv2d, OneByOneScaleAndShift) {
  const Tensor x({1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  const Tensor y = conv2d_forward(x, conv_layer(1, 1, 1, {2}, {0.5f}));
  EXPECT_EQ(y.shape(), (Shape{1, 2, 2}));
  EXPECT_EQ(y.values()[0], 2.5f);
  EXPECT_EQ(y.values()[1], 4.5f);
  EXPECT_EQ(y.values()[2], 6.5f);
  EXPECT_EQ(y.values()[3], 8.5f);
}

TEST(Conv2d, SlidingWindowSum) {
  const Tensor x({1, 3, 3}, std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor y = conv2d_forward(x, conv_layer(1, 1, 2, {1, 1, 1, 1}, {0}));
  EXPECT_EQ(y, Tensor({1, 2, 2}, std::vector<float>{12, 16, 24, 28}));
}

TEST(Conv2d, MatchesDirectLoopOracle) {
  RngStream rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t cin = 1 + rng.below(4), cout = 1 + rng.below(5), k = 1 + rng.below(4);
    const std::size_t h = k + rng.below(9), w = k + rng.below(9);
    const TensorD x = random_tensor({cin, h, w}, rng);
    const ConvParams<double> layer{random_tensor({cout, cin, k, k}, rng), random_tensor({cout}, rng)};
    const TensorD y = conv2d_forward(x, layer);
    ASSERT_EQ(y.shape(), (Shape{cout, h - k + 1, w - k + 1}));
    for (std::size_t o = 0; o < cout; ++o) {
      for (std::size_t i = 0; i + k <= h; ++i) {
        for (std::size_t j = 0; j + k <= w; ++j) {
          double s = layer.bias[o];
          for (std::size_t c = 0; c < cin; ++c) {
            for (std::size_t u = 0; u < k; ++u) {
              for (std::size_t v = 0; v < k; ++v) s += layer.weights[((o * cin + c) * k + u) * k + v] * x.at(c, i + u, j + v);
            }
          }
          EXPECT_NEAR(y.at(o, i, j), s, 1e-12);
        }
      }
    }
  }
}

TEST(Conv2d, TableOneFirstLayerShape) {
  RngStream rng(1);
  const Tensor x({6, 64, 64}, 0.5f);
  const ConvLayerParams layer{xavier_init({16, 6, 7, 7}, 6 * 49, 16 * 49, rng), Tensor({16})};
  EXPECT_EQ(conv2d_forward(x, layer).shape(), (Shape{16, 58, 58}));
}

TEST(Conv2d, ShapeErrorsNameTheDimension) {
  const ConvLayerParams layer = conv_layer(1, 2, 3, std::vector<float>(18, 1.0f), {0});
  try {
    conv2d_forward(Tensor({3, 8, 8}), layer);
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos) << e.what();
  }
  try {
    conv2d_forward(Tensor({2, 2, 8}), layer);
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("height"), std::string::npos) << e.what();
  }
  EXPECT_THROW(conv2d_forward(Tensor({2, 8, 2}), layer), Error);
}

TEST(MaxPool, SingleWindowAndBruteForce) {
  EXPECT_EQ(maxpool2_forward(Tensor({1, 2, 2}, std::vector<float>{1, 2, 3, 4})),
            Tensor({1, 1, 1}, std::vector<float>{4}));
  std::vector<float> v(16);
  std::iota(v.begin(), v.end(), 1.0f);
  EXPECT_EQ(maxpool2_forward(Tensor({1, 4, 4}, v)), Tensor({1, 2, 2}, std::vector<float>{6, 8, 14, 16}));

  RngStream rng(5);
  const TensorD x = random_tensor({3, 7, 9}, rng);
  const TensorD y = maxpool2_forward(x);
  ASSERT_EQ(y.shape(), (Shape{3, 3, 4}));
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        const double m = std::max({x.at(c, 2 * i, 2 * j), x.at(c, 2 * i, 2 * j + 1), x.at(c, 2 * i + 1, 2 * j),
                                   x.at(c, 2 * i + 1, 2 * j + 1)});
        EXPECT_EQ(y.at(c, i, j), m);
      }
    }
  }
}

TEST(MaxPool, FloorDivisionGivesFlattenWidth1024) {
  EXPECT_EQ(maxpool2_forward(Tensor({64, 9, 9})).shape(), (Shape{64, 4, 4}));
  EXPECT_EQ(64u * 4u * 4u, arch::kFeatureWidth);
  EXPECT_THROW(maxpool2_forward(Tensor({1, 1, 4})), Error);
  EXPECT_THROW(maxpool2_forward(Tensor({1, 4, 1})), Error);
}

TEST(Dropout, EvalAndZeroProbabilityAreIdentity) {
  RngStream rng(3);
  const Tensor x = random_tensor({4, 5, 6}, rng).cast<float>();
  const DropoutResult<float> eval = dropout_apply(x, 0.5, Mode::kEval, rng);
  EXPECT_EQ(eval.output, x);
  for (float m : eval.mask.values()) EXPECT_EQ(m, 1.0f);
  EXPECT_EQ(dropout_apply(x, 0.0, Mode::kTrain, rng).output, x);
  EXPECT_THROW(dropout_apply(x, 1.0, Mode::kTrain, rng), Error);
  EXPECT_THROW(dropout_apply(x, -0.1, Mode::kTrain, rng), Error);
}

TEST(Dropout, InvertedScalingPreservesMean) {
  RngStream rng(17);
  const Tensor ones({100000}, 1.0f);
  const DropoutResult<float> r = dropout_apply(ones, 0.1, Mode::kTrain, rng);
  double mean = 0;
  std::size_t dropped = 0;
  for (float v : r.output.values()) {
    mean += v;
    dropped += v == 0.0f;
    EXPECT_TRUE(v == 0.0f || std::abs(v - 1.0f / 0.9f) < 1e-6f);
  }
  mean /= 100000.0;
  EXPECT_GE(mean, 0.99);
  EXPECT_LE(mean, 1.01);
  EXPECT_NEAR(static_cast<double>(dropped) / 100000.0, 0.1, 0.005);
}

TEST(Dropout, ElementwiseExpectationOverManyMasks) {
  RngStream rng(23);
  const Tensor x = random_tensor({64}, rng, 0.5, 2.0).cast<float>();
  std::vector<double> sum(64, 0.0);
  const int masks = 100000;
  for (int m = 0; m < masks; ++m) {
    const DropoutResult<float> r = dropout_apply(x, 0.1, Mode::kTrain, rng);
    for (std::size_t i = 0; i < 64; ++i) sum[i] += r.output[i];
  }
  for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(sum[i] / masks, x[i], 0.01 * x[i]);
}

TEST(Linear, IdentityAndDotProductOracle) {
  const Tensor x({3}, std::vector<float>{0.25f, -1.5f, 2.0f});
  const LinearLayerParams eye{Tensor({3, 3}, std::vector<float>{1, 0, 0, 0, 1, 0, 0, 0, 1}), Tensor({3})};
  EXPECT_EQ(linear_forward(x, eye).values()[0], 0.25f);
  EXPECT_EQ(linear_forward(x, eye).values()[1], -1.5f);
  EXPECT_EQ(linear_forward(x, eye).values()[2], 2.0f);

  const LinearLayerParams l{Tensor({2, 2}, std::vector<float>{3, 4, 5, 6}), Tensor({2}, std::vector<float>{1, -1})};
  const Tensor y = linear_forward(Tensor({2}, std::vector<float>{1, 2}), l);
  EXPECT_EQ(y.values()[0], 12.0f);
  EXPECT_EQ(y.values()[1], 16.0f);
  EXPECT_THROW(linear_forward(Tensor({3}), l), Error);
}

TEST(Linear, Fc1MapsTo256) {
  RngStream rng(2);
  const LinearLayerParams fc1{xavier_init({256, 1024}, 1024, 256, rng), Tensor({256})};
  EXPECT_EQ(linear_forward(Tensor({1024}, 1.0f), fc1).shape(), (Shape{256}));
}

TEST(Linear, OuterProductGradient) {
  const LinearParams<double> l{TensorD({2, 2}, std::vector<double>{0.3, -0.2, 0.7, 0.1}), TensorD({2})};
  const LinearGrads<double> g =
      linear_backward(TensorD({2}, std::vector<double>{1, 2}), l, TensorD({2}, std::vector<double>{1, 0}));
  EXPECT_EQ(g.weights, TensorD({2, 2}, std::vector<double>{1, 2, 0, 0}));
  EXPECT_EQ(g.bias, TensorD({2}, std::vector<double>{1, 0}));
}

TEST(Linear, RowsMatchSingleVectorPath) {
  RngStream rng(8);
  const LinearLayerParams l{random_tensor({37, 53}, rng).cast<float>(), random_tensor({37}, rng).cast<float>()};
  const Tensor rows = random_tensor({9, 53}, rng).cast<float>();
  const Tensor batched = linear_forward_rows(rows, l);
  for (std::size_t r = 0; r < 9; ++r) {
    const Tensor one = linear_forward(Tensor({53}, std::vector<float>(rows.data() + r * 53, rows.data() + (r + 1) * 53)), l);
    for (std::size_t j = 0; j < 37; ++j) EXPECT_EQ(batched.at(r, j), one[j]);
  }
}

TEST(Init, XavierMoments) {
  RngStream rng(42);
  const Tensor t = xavier_init({100000}, 100, 100, rng);
  const double bound = std::sqrt(6.0 / 200.0);
  double mean = 0, var = 0;
  for (float v : t.values()) {
    EXPECT_LE(std::abs(v), bound);
    mean += v;
  }
  mean /= 1e5;
  for (float v : t.values()) var += (v - mean) * (v - mean);
  var /= 1e5 - 1;
  EXPECT_NEAR(mean, 0.0, 0.005);
  EXPECT_NEAR(var, 0.01, 0.001);
  RngStream a(7), b(7);
  EXPECT_EQ(xavier_init({5, 6}, 6, 5, a), xavier_init({5, 6}, 6, 5, b));
}

TEST(Init, UnitUniformMoments) {
  RngStream rng(43);
  const Tensor t = uniform01_init({100000}, rng);
  double mean = 0;
  for (float v : t.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LT(v, 1.0f);
    mean += v;
  }
  mean /= 1e5;
  EXPECT_GE(mean, 0.49);
  EXPECT_LE(mean, 0.51);
  RngStream a(9), b(9);
  EXPECT_EQ(uniform01_init({3, 4}, a), uniform01_init({3, 4}, b));
}

TEST(Model, ShapeChainMatchesArchitecture) {
  const CnnModel m = make_model(1);
  validate_architecture(m.params());
  RngStream rng(1);
  const Tensor x = random_tensor({6, 64, 64}, rng).cast<float>();
  ForwardResult<float> r = model_forward(m, x, rng);
  EXPECT_EQ(r.logits.shape(), (Shape{2}));
  EXPECT_EQ(r.record.conv_act[0].shape(), (Shape{16, 58, 58}));
  EXPECT_EQ(r.record.stage_out[0].shape(), (Shape{16, 29, 29}));
  EXPECT_EQ(r.record.conv_act[1].shape(), (Shape{32, 25, 25}));
  EXPECT_EQ(r.record.stage_out[1].shape(), (Shape{32, 12, 12}));
  EXPECT_EQ(r.record.conv_act[2].shape(), (Shape{64, 9, 9}));
  EXPECT_EQ(r.record.stage_out[2].shape(), (Shape{64, 4, 4}));
  EXPECT_EQ(r.record.flat.size(), 1024u);
  EXPECT_EQ(extract_features(m, x).size(), 1024u);
}

TEST(Model, RejectsWrongInputShape) {
  const CnnModel m = make_model(1);
  RngStream rng(1);
  EXPECT_THROW(model_forward(m, Tensor({6, 63, 64}), rng), Error);
  EXPECT_THROW(model_logits(m, Tensor({5, 64, 64})), Error);
}

TEST(Model, EvalIsDeterministicAndZeroModelGivesZeroLogits) {
  const CnnModel m = make_model(4);
  RngStream rng(2);
  const Tensor x = random_tensor({6, 64, 64}, rng).cast<float>();
  EXPECT_EQ(model_logits(m, x), model_logits(m, x));
  RngStream r1(5), r2(99);
  EXPECT_EQ(model_forward(m, x, r1).logits, model_forward(m, x, r2).logits);

  CnnModel zero;
  zero.params() = zero_params<float>();
  const Tensor z = model_logits(zero, x);
  EXPECT_EQ(z[0], 0.0f);
  EXPECT_EQ(z[1], 0.0f);
}

TEST(Model, InitIsAPureFunctionOfTheSeed) {
  EXPECT_EQ(make_model(3).params(), make_model(3).params());
  EXPECT_FALSE(make_model(3).params() == make_model(4).params());
  const CnnModel unit = make_model(3, FcInit::kUnitUniform);
  for (float v : unit.fc2.weights.values()) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LT(v, 1.0f);
  }
}

TEST(Model, BackwardWithZeroUpstreamIsZero) {
  CnnModel m = make_model(6);
  m.mode = Mode::kTrain;
  RngStream rng(3);
  const ForwardResult<float> r = model_forward(m, random_tensor({6, 64, 64}, rng).cast<float>(), rng);
  const CnnGradients g = model_backward(m, r.record, Tensor({2}));
  visit_params(g, [](std::string_view name, const Tensor& t) {
    for (float v : t.values()) ASSERT_EQ(v, 0.0f) << name;
  });
}

TEST(Model, StaleOrMissingRecordIsRejected) {
  CnnModel m = make_model(6);
  m.mode = Mode::kTrain;
  RngStream rng(3);
  const Tensor x = random_tensor({6, 64, 64}, rng).cast<float>();
  const ForwardResult<float> r = model_forward(m, x, rng);
  try {
    model_backward(m, ActivationRecord<float>{}, Tensor({2}, 1.0f));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStaleRecord);
  }
  TrainConfig cfg;
  OptimizerState state = make_optimizer_state(m.params());
  sgd_step(m, model_backward(m, r.record, Tensor({2}, std::vector<float>{0.5f, -0.5f})), state, cfg);
  try {
    model_backward(m, r.record, Tensor({2}, 1.0f));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStaleRecord);
  }
  const CnnModel copy = m;
  EXPECT_THROW(model_backward(copy, model_forward(m, x, rng).record, Tensor({2}, 1.0f)), Error);
}

// Finite-difference checks in double precision, 20 random configurations per
// layer type.

TEST(Gradients, Conv2d) {
  RngStream rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t cin = 1 + rng.below(3), cout = 1 + rng.below(3), k = 1 + rng.below(3);
    const std::size_t h = k + 1 + rng.below(5), w = k + 1 + rng.below(5);
    TensorD x = random_tensor({cin, h, w}, rng);
    ConvParams<double> layer{random_tensor({cout, cin, k, k}, rng), random_tensor({cout}, rng)};
    const TensorD c = random_tensor({cout, h - k + 1, w - k + 1}, rng);
    const auto f = [&] { return contract(conv2d_forward(x, layer), c); };
    const ConvGrads<double> g = conv2d_backward(x, layer, c, true);
    EXPECT_LT(fd_check(layer.weights, g.weights, f), 1e-4) << "trial " << trial;
    EXPECT_LT(fd_check(layer.bias, g.bias, f), 1e-4) << "trial " << trial;
    EXPECT_LT(fd_check(x, g.input, f), 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, MaxPool) {
  RngStream rng(102);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t ch = 1 + rng.below(3), h = 2 + rng.below(6), w = 2 + rng.below(6);
    // Distinct values 0.01 apart, so no window max is within the step of a tie.
    std::vector<double> vals(ch * h * w);
    std::iota(vals.begin(), vals.end(), 0.0);
    for (std::size_t i = vals.size(); i > 1; --i) std::swap(vals[i - 1], vals[rng.below(i)]);
    for (double& v : vals) v *= 0.01;
    TensorD x({ch, h, w}, vals);
    const PoolResult<double> r = maxpool2_forward_indexed(x);
    const TensorD c = random_tensor(r.output.shape(), rng);
    const auto f = [&] { return contract(maxpool2_forward(x), c); };
    EXPECT_LT(fd_check(x, maxpool2_backward(c, r.argmax, x.shape()), f), 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, Dropout) {
  RngStream rng(103);
  for (int trial = 0; trial < 20; ++trial) {
    TensorD x = random_tensor({1 + rng.below(40)}, rng);
    const double p = rng.uniform(0.0, 0.6);
    const std::uint64_t mask_seed = rng.next_u64();
    RngStream mrng(mask_seed);
    const DropoutResult<double> r = dropout_apply(x, p, Mode::kTrain, mrng);
    const TensorD c = random_tensor(x.shape(), rng);
    const auto f = [&] {
      RngStream again(mask_seed);
      return contract(dropout_apply(x, p, Mode::kTrain, again).output, c);
    };
    EXPECT_LT(fd_check(x, dropout_backward(c, r.mask), f), 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, Relu) {
  RngStream rng(104);
  for (int trial = 0; trial < 20; ++trial) {
    TensorD x = random_tensor({1 + rng.below(50)}, rng);
    for (double& v : x.values()) {
      if (std::abs(v) < 0.01) v += 0.02;
    }
    TensorD y = x;
    relu_inplace(y);
    const TensorD c = random_tensor(x.shape(), rng);
    const auto f = [&] {
      TensorD z = x;
      relu_inplace(z);
      return contract(z, c);
    };
    EXPECT_LT(fd_check(x, relu_backward(c, y), f), 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, Linear) {
  RngStream rng(105);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t in = 1 + rng.below(30), out = 1 + rng.below(12);
    TensorD x = random_tensor({in}, rng);
    LinearParams<double> layer{random_tensor({out, in}, rng), random_tensor({out}, rng)};
    const TensorD c = random_tensor({out}, rng);
    const auto f = [&] { return contract(linear_forward(x, layer), c); };
    const LinearGrads<double> g = linear_backward(x, layer, c);
    EXPECT_LT(fd_check(layer.weights, g.weights, f), 1e-4) << "trial " << trial;
    EXPECT_LT(fd_check(layer.bias, g.bias, f), 1e-4) << "trial " << trial;
    EXPECT_LT(fd_check(x, g.input, f), 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, CrossEntropy) {
  RngStream rng(106);
  for (int trial = 0; trial < 20; ++trial) {
    TensorD logits = random_tensor({2}, rng, -5.0, 5.0);
    const int label = static_cast<int>(rng.below(2));
    const LossResult<double> r = cross_entropy_loss(logits, label);
    const auto f = [&] { return cross_entropy_loss(logits, label).loss; };
    EXPECT_LT(fd_check(logits, r.dlogits, f), 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, FullModelTrainMode) {
  BasicCnnModel<double> m = cast_model<double>(make_model(21));
  m.mode = Mode::kTrain;
  RngStream rng(107);
  const TensorD x = random_tensor({6, 64, 64}, rng);
  const int label = 1;
  const auto loss = [&] {
    RngStream masks(555);
    return cross_entropy_loss(model_forward(m, x, masks).logits, label).loss;
  };
  RngStream masks(555);
  const ForwardResult<double> fwd = model_forward(m, x, masks);
  const BasicCnnParams<double> g = model_backward(m, fwd.record, cross_entropy_loss(fwd.logits, label).dlogits);
  std::vector<std::pair<std::string, TensorD*>> params;
  visit_params(m.params(), [&](std::string_view name, TensorD& t) { params.emplace_back(std::string(name), &t); });
  std::vector<const TensorD*> grads;
  visit_params(g, [&](std::string_view, const TensorD& t) { grads.push_back(&t); });
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_LT(fd_check(*params[i].second, *grads[i], loss, 1e-6, 6), 1e-4) << params[i].first;
  }
}

}  // namespace
}  // namespace evoroc
