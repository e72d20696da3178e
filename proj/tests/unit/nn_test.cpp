#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "support/gradcheck.hpp"
#include "support/random_model.hpp"
#include "vc/nn/model_file.hpp"
#include "vc/nn/network.hpp"
#include "vc/util/base64.hpp"
#include "vc/util/bytes.hpp"

using namespace vc::nn;
using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

TEST(Tensor, ShapeAndViews) {
  TensorF t({2, 3});
  EXPECT_EQ(t.size(), 6);
  t.matrix(2, 3)(1, 2) = 5.f;
  EXPECT_EQ(t[5], 5.f);
  EXPECT_THROW(t.matrix(4, 2), ShapeError);
  EXPECT_THROW(TensorF({2, 0}), ShapeError);
  EXPECT_THROW(TensorF({2}, Vector<float>::Zero(3)), ShapeError);
  EXPECT_EQ(t.reshaped({6}).shape(), (Shape{6}));
  EXPECT_THROW(t.reshape({7}), ShapeError);
}

TEST(Conv, ReferenceShapeAndZeroWeights) {
  ConvGeometry g{3, 16, 5, 2};
  std::mt19937_64 rng(1);
  auto x = vc::oracle::random_tensor({2, 3, 32, 32}, rng).cast<float>();
  TensorF w({16, 3, 5, 5}), b({16});
  const TensorF y = conv2d_forward(x, w, b, g);
  EXPECT_EQ(y.shape(), (Shape{2, 16, 32, 32}));
  EXPECT_TRUE(y.values().isZero(0));
}

TEST(Conv, MatchesDirectLoop) {
  std::mt19937_64 rng(2);
  ConvGeometry g{2, 3, 5, 2};
  const TensorD x = vc::oracle::random_tensor({1, 2, 6, 7}, rng);
  const TensorD w = vc::oracle::random_tensor({3, 2, 5, 5}, rng);
  const TensorD b = vc::oracle::random_tensor({3}, rng);
  const TensorD y = conv2d_forward(x, w, b, g);
  for (Index o = 0; o < 3; ++o)
    for (Index i = 0; i < 6; ++i)
      for (Index j = 0; j < 7; ++j) {
        double acc = b[o];
        for (Index c = 0; c < 2; ++c)
          for (Index ky = 0; ky < 5; ++ky)
            for (Index kx = 0; kx < 5; ++kx) {
              const Index yy = i + ky - 2, xx = j + kx - 2;
              if (yy < 0 || yy >= 6 || xx < 0 || xx >= 7) continue;
              acc += w[((o * 2 + c) * 5 + ky) * 5 + kx] * x[(c * 6 + yy) * 7 + xx];
            }
        EXPECT_NEAR(y[(o * 6 + i) * 7 + j], acc, 1e-12);
      }
}

TEST(Conv, RejectsShapeMismatch) {
  ConvGeometry g{3, 4, 5, 2};
  TensorF x({1, 2, 8, 8}), w({4, 3, 5, 5}), b({4});
  EXPECT_THROW(conv2d_forward(x, w, b, g), ShapeError);
  TensorF x3({1, 3, 8, 8}), wbad({4, 3, 3, 3});
  EXPECT_THROW(conv2d_forward(x3, wbad, b, g), ShapeError);
}

TEST(MaxPool, HalvesAndRejectsOdd) {
  TensorF x({1, 16, 32, 32});
  std::vector<Index> argmax;
  EXPECT_EQ(maxpool2d_forward(x, argmax).shape(), (Shape{1, 16, 16, 16}));
  TensorF odd({1, 1, 5, 4});
  EXPECT_THROW(maxpool2d_forward(odd, argmax), ShapeError);
}

TEST(MaxPool, ConstantInputRoutesToFirstElement) {
  const TensorF x = TensorF::constant({1, 1, 4, 4}, 3.f);
  std::vector<Index> argmax;
  const TensorF y = maxpool2d_forward(x, argmax);
  EXPECT_TRUE((y.values().array() == 3.f).all());
  const TensorF dx = maxpool2d_backward(TensorF::constant({1, 1, 2, 2}, 1.f), std::span<const Index>(argmax), x.shape());
  const std::vector<float> expect{1, 0, 1, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0};
  for (Index i = 0; i < 16; ++i) EXPECT_EQ(dx[i], expect[static_cast<std::size_t>(i)]) << i;
}

TEST(Linear, IdentityReproducesInput) {
  std::mt19937_64 rng(3);
  const TensorD x = vc::oracle::random_tensor({2, 320}, rng);
  TensorD w({320, 320}), b({320});
  w.matrix(320, 320).setIdentity();
  EXPECT_EQ(linear_forward(x, w, b), x);
}

TEST(Linear, ReferenceHeadShape) {
  TensorF x({4, 20, 4, 4}), w({10, 320}), b({10});
  EXPECT_EQ(linear_forward(x, w, b).shape(), (Shape{4, 10}));
  const auto g = linear_backward(x, w, TensorF({4, 10}));
  EXPECT_EQ(g.dx.shape(), x.shape());
  TensorF wrong({10, 300});
  EXPECT_THROW(linear_forward(x, wrong, b), ShapeError);
}

TEST(Softmax, UniformLogitsGiveLogClasses) {
  TensorF z({3, 10});
  const std::vector<int> labels{0, 4, 9};
  const auto out = softmax_cross_entropy(z, std::span<const int>(labels));
  EXPECT_NEAR(out.loss, std::log(10.0), 1e-6);
  for (Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(out.dlogits.matrix(3, 10).row(i).cast<double>().sum(), 0.0, 1e-6);
    EXPECT_NEAR(out.probabilities.matrix(3, 10).row(i).cast<double>().sum(), 1.0, 1e-6);
  }
}

TEST(Softmax, ProbabilitiesAreDistributions) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const TensorF z = vc::oracle::random_tensor({4, 10}, rng, -30, 30).cast<float>();
    const std::vector<int> labels{1, 2, 3, 4};
    const auto out = softmax_cross_entropy(z, std::span<const int>(labels));
    const auto p = out.probabilities.matrix(4, 10);
    EXPECT_TRUE((p.array() >= 0).all());
    for (Index i = 0; i < 4; ++i) EXPECT_NEAR(p.row(i).cast<double>().sum(), 1.0, 1e-6);
  }
}

TEST(Softmax, LabelOutOfRange) {
  TensorF z({1, 10});
  const std::vector<int> bad{10};
  EXPECT_THROW(softmax_cross_entropy(z, std::span<const int>(bad)), std::out_of_range);
}

TEST(GradientCheck, EveryLayerFewSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_LT(vc::oracle::check_conv_toy(seed), 1e-4) << seed;
    EXPECT_LT(vc::oracle::check_conv(seed), 1e-4) << seed;
    EXPECT_LT(vc::oracle::check_maxpool(seed), 1e-4) << seed;
    EXPECT_LT(vc::oracle::check_relu(seed), 1e-4) << seed;
    EXPECT_LT(vc::oracle::check_linear(seed), 1e-4) << seed;
    EXPECT_LT(vc::oracle::check_softmax(seed), 1e-5) << seed;
  }
}

TEST(GradientCheck, WholeNetworkBackprop) {
  Network<double> net({2, 8, 8}, {ConvSpec{2, 3}, ActivationSpec{}, MaxPoolSpec{}, FcSpec{48, 5}, SoftmaxSpec{}});
  net.initialize(11);
  std::mt19937_64 rng(12);
  for (auto& l : net.layers())
    if (!l.params.empty()) l.params[1] = vc::oracle::random_tensor(l.params[1].shape(), rng, -0.1, 0.1);
  const TensorD x = vc::oracle::random_tensor({3, 2, 8, 8}, rng);
  const std::vector<int> labels{0, 3, 4};
  ForwardCache<double> cache;
  const auto out = softmax_cross_entropy(net.forward(x, &cache), std::span<const int>(labels));
  const auto back = net.backward(cache, out.dlogits);
  auto loss = [&] { return softmax_cross_entropy(net.forward(x), std::span<const int>(labels)).loss; };
  for (std::size_t i : {0u, 3u})
    for (std::size_t p = 0; p < 2; ++p)
      EXPECT_LT(vc::oracle::compare(net.layers()[i].params[p], back.grads[i][p], loss), 1e-4) << i << "/" << p;
}

// Direct evaluation of theta - alpha * g / sqrt(beta + sum g^2) in long double.
struct LongDoubleAdaGrad {
  long double alpha, beta, accum = 0, theta;
  void step(long double g) {
    accum += g * g;
    theta -= alpha * g / std::sqrt(beta + accum);
  }
};

TEST(AdaGrad, FirstStepExample) {
  TensorF theta({1}), g = TensorF::constant({1}, 1.f);
  AdaGradState s({0.01, 1.0}, {1});
  adagrad_update(theta, g, s);
  EXPECT_EQ(s.accum[0], 1.0);
  EXPECT_NEAR(theta[0], -0.00707107, 1e-8);
  EXPECT_NEAR(theta[0] / (-0.01 / std::sqrt(2.0)), 1.0, 1e-7);
}

TEST(AdaGrad, MatchesLongDoubleEvaluation) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist(0, 2);
  for (double beta : {1.0, 0.5, 1e-3}) {
    TensorD theta({64}), g({64});
    for (Index i = 0; i < 64; ++i) theta[i] = dist(rng);
    std::vector<LongDoubleAdaGrad> ref;
    for (Index i = 0; i < 64; ++i) ref.push_back({0.01L, beta, 0, theta[i]});
    AdaGradState s({0.01, beta}, {64});
    for (int step = 0; step < 50; ++step) {
      for (Index i = 0; i < 64; ++i) g[i] = dist(rng);
      adagrad_update(theta, g, s);
      for (Index i = 0; i < 64; ++i) ref[static_cast<std::size_t>(i)].step(g[i]);
    }
    for (Index i = 0; i < 64; ++i) {
      const long double want = ref[static_cast<std::size_t>(i)].theta;
      EXPECT_LE(std::abs((theta[i] - want) / want), 1e-7L);
    }
  }
}

TEST(AdaGrad, ZeroGradientIsFixedPoint) {
  std::mt19937_64 rng(6);
  TensorF theta = vc::oracle::random_tensor({10}, rng).cast<float>();
  const TensorF before = theta;
  AdaGradState s({0.01, 1.0}, {10});
  s.accum.setConstant(3.0);
  adagrad_update(theta, TensorF({10}), s);
  EXPECT_EQ(theta, before);
  EXPECT_TRUE((s.accum.array() == 3.0).all());
}

TEST(AdaGrad, AccumulatorMonotoneAndStepBounded) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> dist(0, 50);
  for (double beta : {1.0, 0.25}) {
    const double alpha = 0.01;
    TensorD theta({32});
    AdaGradState s({alpha, beta}, {32});
    for (int step = 0; step < 100; ++step) {
      TensorD g({32});
      for (Index i = 0; i < 32; ++i) g[i] = dist(rng);
      const TensorD before = theta;
      const Vector<double> acc = s.accum;
      adagrad_update(theta, g, s);
      EXPECT_TRUE((s.accum.array() >= acc.array()).all());
      EXPECT_LE((theta.values() - before.values()).cwiseAbs().maxCoeff(), alpha / std::sqrt(beta) + 1e-15);
    }
  }
}

TEST(AdaGrad, RejectsBadConfigAndShapes) {
  EXPECT_THROW(AdaGradState({0.01, 0.0}, {1}), std::invalid_argument);
  EXPECT_THROW(AdaGradState({0.01, -1.0}, {1}), std::invalid_argument);
  TensorF theta({2}), g({3});
  AdaGradState s({0.01, 1.0}, {2});
  EXPECT_THROW(adagrad_update(theta, g, s), ShapeError);
}

TEST(Network, ReferenceShapeAudit) {
  const auto shapes = shape_audit(reference_cnn_input(), reference_cnn_layers());
  // conv, pool and fc outputs; activations and softmax keep their input shape
  const std::vector<Shape> got{shapes[0], shapes[1], shapes[3], shapes[4], shapes[6],
                               shapes[7], shapes[9], {numel(shapes[9])}, shapes[10]};
  const std::vector<Shape> expect{{3, 32, 32}, {16, 32, 32}, {16, 16, 16}, {20, 16, 16}, {20, 8, 8},
                                  {20, 8, 8},  {20, 4, 4},   {320},        {10}};
  EXPECT_EQ(got, expect);
  EXPECT_EQ(shapes.back(), (Shape{10}));
}

TEST(Network, RejectsNonComposingLayers) {
  EXPECT_THROW(Network<float>({3, 32, 32}, {ConvSpec{3, 16}, FcSpec{100, 10}}), ShapeError);
  EXPECT_THROW(Network<float>({3, 31, 31}, {MaxPoolSpec{}}), ShapeError);
  EXPECT_THROW(Network<float>({3, 8, 8}, {SoftmaxSpec{}, FcSpec{192, 10}}), ShapeError);
}

TEST(Network, PredictOnUntrainedModelInRange) {
  Network<float> net(reference_cnn_input(), reference_cnn_layers());
  TensorF x({3, 3, 32, 32});
  for (int c : predict(net, x)) {
    EXPECT_GE(c, 0);
    EXPECT_LT(c, 10);
  }
}

TEST(Network, SlicesComposeToWhole) {
  Network<float> net(reference_cnn_input(), reference_cnn_layers());
  net.initialize(3);
  std::mt19937_64 rng(8);
  const TensorF x = vc::oracle::random_tensor({2, 3, 32, 32}, rng).cast<float>();
  const std::size_t cut = net.fc_cut();
  EXPECT_EQ(cut, 9u);
  const auto conv = net.slice(0, cut), head = net.slice(cut, net.size());
  EXPECT_EQ(head.forward(conv.forward(x)), net.forward(x));
}

TEST(Network, OverfitsSmallBatch) {
  Network<float> net(reference_cnn_input(), reference_cnn_layers());
  net.initialize(42);
  Optimizer opt(net, {0.05, 1.0});
  std::mt19937_64 rng(9);
  const TensorF x = vc::oracle::random_tensor({10, 3, 32, 32}, rng, 0, 1).cast<float>();
  const std::vector<int> labels{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  double first = 0, last = 0;
  int steps = 0;
  for (; steps < 200; ++steps) {
    last = train_step(net, opt, x, std::span<const int>(labels)).loss;
    if (steps == 0) first = last;
    if (last < 0.1) break;
  }
  EXPECT_LT(last, 0.1) << "after " << steps << " steps, initial loss " << first;
}

using vc::oracle::bitwise_equal;
using vc::oracle::random_model;

TEST(ModelFile, RoundTripIsBitExact) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 100; ++i) {
    const auto net = random_model(rng);
    const auto loaded = deserialize_model(serialize_model(net));
    EXPECT_TRUE(bitwise_equal(net, loaded.network)) << i;
    EXPECT_FALSE(loaded.optimizer.has_value());
  }
}

TEST(ModelFile, OptimizerStateOptional) {
  Network<float> net({1, 4, 4}, {ConvSpec{1, 2}, MaxPoolSpec{}, FcSpec{8, 3}, SoftmaxSpec{}});
  net.initialize(1);
  Optimizer opt(net, {0.05, 0.5});
  opt.states()[0][0].accum.setConstant(0.1);
  const auto loaded = deserialize_model(serialize_model(net, &opt));
  ASSERT_TRUE(loaded.optimizer.has_value());
  EXPECT_EQ(loaded.optimizer->config().alpha, 0.05);
  EXPECT_EQ(loaded.optimizer->config().beta, 0.5);
  EXPECT_EQ(loaded.optimizer->states()[0][0].accum, opt.states()[0][0].accum);
}

TEST(ModelFile, Errors) {
  Network<float> net({1, 4, 4}, {ConvSpec{1, 2}, MaxPoolSpec{}, FcSpec{8, 3}, SoftmaxSpec{}});
  const vc::Json good = model_to_json(net);
  auto kind_of = [](const vc::Json& doc) {
    try {
      model_from_json(doc);
    } catch (const ModelFileError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  vc::Json truncated = good;
  auto& data = truncated["layers"][0]["params"][0]["data"];
  data = data.get<std::string>().substr(0, data.get<std::string>().size() - 3);
  EXPECT_EQ(kind_of(truncated), static_cast<int>(ModelFileErrorKind::corrupt_data));

  vc::Json short_blob = good;
  short_blob["layers"][0]["params"][0]["data"] = vc::base64_encode("abcd");
  EXPECT_EQ(kind_of(short_blob), static_cast<int>(ModelFileErrorKind::corrupt_data));

  vc::Json version = good;
  version["format_version"] = 2;
  EXPECT_EQ(kind_of(version), static_cast<int>(ModelFileErrorKind::version_mismatch));

  vc::Json shape = good;
  shape["layers"][2]["in_dim"] = 9;
  EXPECT_EQ(kind_of(shape), static_cast<int>(ModelFileErrorKind::shape_mismatch));

  vc::Json param_shape = good;
  param_shape["layers"][2]["params"][1] = tensor_to_json(TensorF({4}));
  EXPECT_EQ(kind_of(param_shape), static_cast<int>(ModelFileErrorKind::shape_mismatch));

  EXPECT_THROW(deserialize_model("{not json"), ModelFileError);
}

TEST(ModelFile, CrossPlatformFixture) {
  std::ifstream in(VC_FIXTURE_DIR "/model_v1.json");
  ASSERT_TRUE(in) << "fixture missing";
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto loaded = deserialize_model(text);
  const auto& layers = loaded.network.layers();
  ASSERT_EQ(layers.size(), 5u);
  EXPECT_EQ(loaded.network.input_shape(), (Shape{1, 4, 4}));
  // parameter k of tensor p in layer i holds (-1)^k * (k + 1) / 8 + p / 10 + i
  for (std::size_t i = 0; i < layers.size(); ++i)
    for (std::size_t p = 0; p < layers[i].params.size(); ++p) {
      const auto& t = layers[i].params[p];
      for (Index k = 0; k < t.size(); ++k) {
        const double v = (k % 2 ? -1.0 : 1.0) * static_cast<double>(k + 1) / 8.0 + static_cast<double>(p) / 10.0 +
                         static_cast<double>(i);
        EXPECT_EQ(t[k], static_cast<float>(v)) << i << "/" << p << "/" << k;
      }
    }
  ASSERT_TRUE(loaded.optimizer.has_value());
  EXPECT_EQ(loaded.optimizer->states()[0][0].accum[3], 0.1 * 3);
  EXPECT_EQ(loaded.optimizer->config().alpha, 0.01);
}
