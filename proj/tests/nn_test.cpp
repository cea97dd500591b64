#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qv/common/error.hpp"
#include "qv/common/rng.hpp"
#include "qv/nn/adam.hpp"
#include "qv/nn/checkpoint.hpp"
#include "qv/nn/train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace qv::nn {
namespace {

using oracle::random_batch;

ModelSpec single_conv(Shape3 in, Conv2D conv) {
  ModelSpec spec;
  spec.input_shape = in;
  spec.layers = {conv, Flatten{}, Dense{2, Activation::kLinear}, Softmax{}};
  return spec;
}

// Straightforward five-loop convolution, TF "same" padding with the odd pixel
// after, HWIO weights.
Tensor4 naive_conv(const Tensor4& in, const LayerParams& p, const Conv2D& c) {
  const int oh = conv_output_extent(in.shape.height, c.kernel, c.stride, c.padding);
  const int ow = conv_output_extent(in.shape.width, c.kernel, c.stride, c.padding);
  int pt = 0, pl = 0;
  if (c.padding == PaddingMode::kSame) {
    pt = std::max((oh - 1) * c.stride + c.kernel - in.shape.height, 0) / 2;
    pl = std::max((ow - 1) * c.stride + c.kernel - in.shape.width, 0) / 2;
  }
  const int cin = in.shape.channels;
  Tensor4 out(in.batch, {oh, ow, c.filters});
  for (int n = 0; n < in.batch; ++n)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        for (int f = 0; f < c.filters; ++f) {
          double acc = p.bias[f];
          for (int ky = 0; ky < c.kernel; ++ky)
            for (int kx = 0; kx < c.kernel; ++kx)
              for (int ci = 0; ci < cin; ++ci) {
                const int iy = y * c.stride + ky - pt;
                const int ix = x * c.stride + kx - pl;
                if (iy < 0 || ix < 0 || iy >= in.shape.height || ix >= in.shape.width) continue;
                acc += in.at(n, iy, ix, ci) *
                       p.weights[((ky * c.kernel + kx) * cin + ci) * c.filters + f];
              }
          if (c.activation == Activation::kRelu) acc = std::max(acc, 0.0);
          out.at(n, y, x, f) = acc;
        }
  return out;
}

// Flatten -> Dense(2, linear) -> Softmax applied to oracle features.
std::vector<double> head_logits(const Tensor4& features, const LayerParams& dense) {
  const std::size_t fan_in = features.shape.size();
  const std::size_t units = dense.bias.size();
  std::vector<double> out;
  for (int n = 0; n < features.batch; ++n) {
    std::vector<double> z(dense.bias);
    for (std::size_t i = 0; i < fan_in; ++i)
      for (std::size_t u = 0; u < units; ++u) z[u] += features.example(n)[i] * dense.weights[i * units + u];
    const double m = std::max(z[0], z[1]);
    const double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
    out.push_back(e0 / (e0 + e1));
    out.push_back(e1 / (e0 + e1));
  }
  return out;
}

TEST(Softmax, ZeroLogitsGiveHalf) {
  ModelSpec spec;
  spec.input_shape = {1, 1, 3};
  spec.layers = {Dense{2, Activation::kLinear}, Softmax{}};
  auto model = TrainedModel::initialize(spec, 1);
  std::fill(model.params[0].weights.begin(), model.params[0].weights.end(), 0.0);
  SplitMix64 rng(3);
  const auto probs = forward(model, random_batch(rng, 4, spec.input_shape));
  for (double p : probs.values) EXPECT_DOUBLE_EQ(p, 0.5);
}

TEST(Softmax, RowsSumToOne) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    ModelSpec spec = stage2_qnn({4, 4, 16}, 8, 0.0);
    const auto model = TrainedModel::initialize(spec, rng.next());
    const auto probs = forward(model, random_batch(rng, 5, spec.input_shape, -3, 3));
    for (int n = 0; n < probs.batch; ++n) {
      EXPECT_NEAR(probs.example(n)[0] + probs.example(n)[1], 1.0, 1e-9);
    }
  }
}

TEST(Conv, MatchesNaiveLoopExactlyOnIntegerData) {
  // Small integers keep every product and partial sum exact, so any
  // summation order must agree bit for bit.
  SplitMix64 rng(5);
  for (auto padding : {PaddingMode::kValid, PaddingMode::kSame}) {
    for (int kernel : {1, 2, 3, 4}) {
      for (int stride : {1, 2}) {
        Conv2D c{3, kernel, stride, padding, Activation::kLinear};
        auto spec = single_conv({5, 5, 2}, c);
        auto model = TrainedModel::initialize(spec, rng.next());
        for (auto& w : model.params[0].weights) w = static_cast<double>(rng.below(9)) - 4.0;
        for (auto& b : model.params[0].bias) b = static_cast<double>(rng.below(5)) - 2.0;
        for (auto& w : model.params[2].weights) w = 1.0 / 1024.0 * (static_cast<double>(rng.below(5)) - 2.0);
        Tensor4 x(2, {5, 5, 2});
        for (auto& v : x.values) v = static_cast<double>(rng.below(7)) - 3.0;

        const Tensor4 ref = naive_conv(x, model.params[0], c);
        const auto expected = head_logits(ref, model.params[2]);
        const auto probs = forward(model, x);
        ASSERT_EQ(probs.values.size(), expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
          EXPECT_EQ(probs.values[i], expected[i]) << "kernel " << kernel << " stride " << stride;
        }
      }
    }
  }
}

TEST(Conv, MatchesNaiveLoopOnRealData) {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Conv2D c{2 + static_cast<int>(rng.below(3)), 1 + static_cast<int>(rng.below(4)),
             1 + static_cast<int>(rng.below(2)),
             rng.below(2) ? PaddingMode::kSame : PaddingMode::kValid, Activation::kRelu};
    auto spec = single_conv({5, 5, 2}, c);
    const auto model = TrainedModel::initialize(spec, rng.next());
    const Tensor4 x = random_batch(rng, 3, {5, 5, 2});
    const auto expected = head_logits(naive_conv(x, model.params[0], c), model.params[2]);
    const auto probs = forward(model, x);
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(probs.values[i], expected[i], 1e-13);
  }
}

TEST(Conv, IdentityKernelPassesInputThrough) {
  ModelSpec spec;
  spec.input_shape = {4, 3, 2};
  spec.layers = {Conv2D{2, 1, 1, PaddingMode::kValid, Activation::kLinear}, Flatten{},
                 Dense{2, Activation::kLinear}, Softmax{}};
  auto model = TrainedModel::initialize(spec, 2);
  model.params[0].weights = {1, 0, 0, 1};
  model.params[0].bias = {0, 0};
  SplitMix64 rng(8);
  const Tensor4 x = random_batch(rng, 2, spec.input_shape);
  const auto expected = head_logits(x, model.params[2]);
  const auto probs = forward(model, x);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_DOUBLE_EQ(probs.values[i], expected[i]);
}

TEST(Dropout, RateZeroMatchesInference) {
  const auto spec = stage1_qnn({6, 6, 4}, 8, 0.0);
  const auto model = TrainedModel::initialize(spec, 4);
  SplitMix64 rng(9);
  const Tensor4 x = random_batch(rng, 3, spec.input_shape, 0, 1);
  EXPECT_EQ(forward(model, x, true, 77).values, forward(model, x, false).values);
}

TEST(Dropout, DroppedUnitGetsZeroGradient) {
  ModelSpec spec;
  spec.input_shape = {1, 1, 5};
  spec.layers = {Dense{16, Activation::kLinear}, Dropout{0.5}, Dense{2, Activation::kLinear},
                 Softmax{}};
  const auto model = TrainedModel::initialize(spec, 12);
  SplitMix64 rng(13);
  const Tensor4 x = random_batch(rng, 1, spec.input_shape);
  const std::vector<int> labels{1};
  const auto r = backward(model, x, labels, {}, 99);

  // Recover the mask: a dropped unit contributes nothing to the logits, so
  // perturbing its incoming bias leaves the training-mode output unchanged.
  int dropped = 0;
  for (int u = 0; u < 16; ++u) {
    auto probe = model;
    probe.params[0].bias[u] += 1.0;
    const bool is_dropped = forward(probe, x, true, 99).values == forward(model, x, true, 99).values;
    if (is_dropped) {
      ++dropped;
      EXPECT_EQ(r.gradients[0].bias[u], 0.0);
      for (int i = 0; i < 5; ++i) EXPECT_EQ(r.gradients[0].weights[i * 16 + u], 0.0);
      EXPECT_EQ(r.gradients[2].weights[u * 2], 0.0);
      EXPECT_EQ(r.gradients[2].weights[u * 2 + 1], 0.0);
    } else {
      EXPECT_NE(r.gradients[0].bias[u], 0.0);
    }
  }
  EXPECT_GT(dropped, 0);
  EXPECT_LT(dropped, 16);
}

TEST(Dropout, InvertedScaling) {
  ModelSpec spec;
  spec.input_shape = {1, 1, 1};
  spec.layers = {Dense{400, Activation::kLinear}, Dropout{0.25}, Dense{2, Activation::kLinear},
                 Softmax{}};
  auto model = TrainedModel::initialize(spec, 1);
  std::fill(model.params[0].weights.begin(), model.params[0].weights.end(), 1.0);
  // Only unit-to-class-1 connections; logit 1 = sum of kept activations.
  std::fill(model.params[2].weights.begin(), model.params[2].weights.end(), 0.0);
  for (int u = 0; u < 400; ++u) model.params[2].weights[u * 2 + 1] = 1.0 / 400.0;
  Tensor4 x(1, spec.input_shape, 1.0);
  const double p = forward(model, x, true, 5).values[1];
  const double z = std::log(p / (1 - p));  // logit difference = mean kept * 1/(1-rate)
  const double kept = z * 400.0 * 0.75;
  EXPECT_NEAR(kept, std::round(kept), 1e-6);
  EXPECT_GT(kept, 250);
  EXPECT_LT(kept, 350);
}

TEST(Loss, Examples) {
  Tensor4 perfect(2, {1, 1, 2});
  perfect.values = {1, 0, 0, 1};
  const std::vector<int> labels{0, 1};
  EXPECT_DOUBLE_EQ(loss(perfect, labels), 0.0);

  Tensor4 half(3, {1, 1, 2}, 0.5);
  const std::vector<int> mixed{0, 1, 1};
  const std::vector<double> even{1.0, 1.0};
  EXPECT_NEAR(loss(half, mixed, even), std::numbers::ln2, 1e-15);

  const std::vector<int> ones{1, 1, 1};
  const std::vector<double> weighted{1.0, 2.0};
  EXPECT_NEAR(loss(half, ones, weighted), 2 * std::numbers::ln2, 1e-15);
}

TEST(Loss, FloorsConfidentMistakes) {
  Tensor4 wrong(1, {1, 1, 2});
  wrong.values = {1.0, 0.0};
  const std::vector<int> labels{1};
  EXPECT_NEAR(loss(wrong, labels), -std::log(1e-12), 1e-9);
}

TEST(Loss, RejectsBadLabels) {
  Tensor4 half(1, {1, 1, 2}, 0.5);
  const std::vector<int> bad{2};
  EXPECT_THROW(loss(half, bad), InputError);
  const std::vector<int> neg{-1};
  EXPECT_THROW(loss(half, neg), InputError);
}

using oracle::tiny_model;

TEST(Gradients, MatchFiniteDifferences) {
  SplitMix64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto result = oracle::gradient_trial(rng, trial);
    EXPECT_TRUE(result.layout_ok) << "trial " << trial;
    EXPECT_GT(result.checked, 0u);
    EXPECT_LT(result.worst, 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, FinalBiasSumsToZero) {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto spec = tiny_model(rng);
    const auto model = TrainedModel::initialize(spec, rng.next());
    const Tensor4 x = random_batch(rng, 1, spec.input_shape);
    const std::vector<int> labels{static_cast<int>(rng.below(2))};
    const auto r = backward(model, x, labels, {}, 1);
    const auto& bias = r.gradients[spec.layers.size() - 2].bias;
    EXPECT_NEAR(bias[0] + bias[1], 0.0, 1e-15);
  }
}

TEST(Forward, Errors) {
  const auto spec = stage1_qnn({16, 16, 4}, 8, 0.0);
  const auto model = TrainedModel::initialize(spec, 1);
  EXPECT_THROW(forward(model, Tensor4(1, {16, 16, 3})), StructuralError);
  Tensor4 bad(1, spec.input_shape, 0.1);
  bad.values[7] = std::nan("");
  EXPECT_THROW(forward(model, bad), NumericError);

  auto blowup = model;
  blowup.params[0].weights[0] = 1e308;
  Tensor4 big(1, spec.input_shape, 1e10);
  try {
    forward(blowup, big);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("conv"), std::string::npos) << e.what();
  }
}

TEST(Spec, RejectsNonComposingStacks) {
  ModelSpec spec;
  spec.input_shape = {4, 4, 1};
  spec.layers = {Conv2D{2, 5, 1, PaddingMode::kValid, Activation::kRelu}, Flatten{},
                 Dense{2, Activation::kLinear}, Softmax{}};
  EXPECT_THROW(spec.validate(), StructuralError);
  spec.layers = {Dense{2, Activation::kLinear}, Softmax{}};
  EXPECT_THROW(spec.validate(), StructuralError);  // dense on an unflattened map
  spec.layers = {Flatten{}, Dense{3, Activation::kLinear}, Softmax{}};
  EXPECT_THROW(spec.validate(), StructuralError);  // width != classes
  spec.layers = {Flatten{}, Dense{2, Activation::kLinear}};
  EXPECT_THROW(spec.validate(), StructuralError);  // no softmax
}

TEST(Adam, FirstStepFromZeroMoments) {
  ModelSpec spec;
  spec.input_shape = {1, 1, 1};
  spec.layers = {Flatten{}, Dense{2, Activation::kLinear}, Softmax{}};
  auto model = TrainedModel::initialize(spec, 1);
  const auto before = model.params[1].weights;
  Gradients g(3);
  g[1].weights = {1.0, 0.0};
  g[1].bias = {0.0, 0.0};
  adam_step(model, g, AdamConfig{});
  EXPECT_NEAR(model.params[1].weights[0] - before[0], -1e-3 / (1 + 1e-8), 1e-9);
  EXPECT_EQ(model.params[1].weights[1], before[1]);
  EXPECT_EQ(model.adam.step, 1u);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  const auto spec = stage2_qnn();
  auto model = TrainedModel::initialize(spec, 3);
  const auto before = model.params;
  Gradients g(model.params.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i].weights.assign(model.params[i].weights.size(), 0.0);
    g[i].bias.assign(model.params[i].bias.size(), 0.0);
  }
  adam_step(model, g, AdamConfig{});
  adam_step(model, g, AdamConfig{});
  EXPECT_EQ(model.params, before);
}

TEST(Adam, StatefulAcrossSteps) {
  ModelSpec spec;
  spec.input_shape = {1, 1, 1};
  spec.layers = {Flatten{}, Dense{2, Activation::kLinear}, Softmax{}};
  const auto start = TrainedModel::initialize(spec, 1);
  Gradients g(3);
  g[1].weights = {0.3, -0.7};
  g[1].bias = {0.1, 0.2};
  auto twice = start;
  adam_step(twice, g, AdamConfig{});
  adam_step(twice, g, AdamConfig{});
  auto doubled = start;
  AdamConfig big;
  big.learning_rate = 2e-3;
  adam_step(doubled, g, big);
  EXPECT_NE(twice.params, doubled.params);
  EXPECT_EQ(twice.adam.step, 2u);
}

TEST(Adam, RejectsShapeMismatch) {
  auto model = TrainedModel::initialize(stage2_qnn(), 3);
  Gradients g(model.params.size());
  EXPECT_THROW(adam_step(model, g, AdamConfig{}), StructuralError);
}

TEST(Parameters, FormulaExamples) {
  ModelSpec conv;
  conv.input_shape = {32, 32, 1};
  conv.layers = {Conv2D{32, 4, 1, PaddingMode::kSame, Activation::kRelu}, Flatten{},
                 Dense{2, Activation::kLinear}, Softmax{}};
  const auto c = count_parameters(conv);
  EXPECT_EQ(c.layers[0].parameters, 544u);
  EXPECT_EQ(c.layers[1].parameters, 0u);

  const auto qnn = count_parameters(stage1_qnn());
  EXPECT_EQ(qnn.flatten_width, 1568u);
  EXPECT_EQ(qnn.layers[3].parameters, 50208u);
  EXPECT_EQ(count_parameters(stage1_cnn()).flatten_width, 1024u);
}

TEST(Parameters, MatchAllocatedArrays) {
  for (const auto& spec : {stage1_cnn(), stage1_qnn(), stage2_cnn(), stage2_qnn()}) {
    const auto counted = count_parameters(spec);
    const auto model = TrainedModel::initialize(spec, 1);
    EXPECT_EQ(counted.total, model.parameter_count()) << spec.name;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      EXPECT_EQ(counted.layers[i].parameters, model.params[i].size()) << spec.name << " " << i;
    }
    EXPECT_FALSE(summarize(spec).empty());
  }
}

Dataset blobs(SplitMix64& rng, int per_class) {
  Dataset d;
  d.shape = {2, 2, 1};
  for (int i = 0; i < 2 * per_class; ++i) {
    const int label = i % 2;
    std::vector<double> v(4);
    for (auto& x : v) x = (label ? 0.7 : -0.7) + 0.2 * rng.normal();
    d.add(v, label);
  }
  return d;
}

ModelSpec blob_model() {
  ModelSpec spec;
  spec.input_shape = {2, 2, 1};
  spec.layers = {Conv2D{2, 2, 1, PaddingMode::kValid, Activation::kRelu}, Flatten{},
                 Dense{4, Activation::kRelu}, Dense{2, Activation::kLinear}, Softmax{}};
  return spec;
}

TEST(Train, SeparableBlobsReachPerfectAccuracy) {
  SplitMix64 rng(41);
  const auto train_set = blobs(rng, 20);
  const auto test_set = blobs(rng, 20);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 8;
  cfg.adam.learning_rate = 1e-2;
  cfg.seed = 7;
  const auto r = train(blob_model(), train_set, test_set, cfg);
  ASSERT_EQ(r.history.size(), 200u);
  EXPECT_EQ(r.history.back().train_accuracy, 1.0);
  EXPECT_EQ(r.model.adam.step, 200u * 5u);
}

TEST(Train, DeterministicForFixedSeed) {
  SplitMix64 rng(42);
  const auto train_set = blobs(rng, 10);
  const auto test_set = blobs(rng, 10);
  ModelSpec spec = blob_model();
  spec.layers.insert(spec.layers.begin() + 3, Dropout{0.3});
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 4;
  cfg.seed = 123;
  cfg.class_weights = {0.8, 1.3};
  const auto a = train(spec, train_set, test_set, cfg);
  const auto b = train(spec, train_set, test_set, cfg);
  EXPECT_EQ(format_metrics(a.history), format_metrics(b.history));
  EXPECT_EQ(encode_model(a.model), encode_model(b.model));
  cfg.seed = 124;
  const auto c = train(spec, train_set, test_set, cfg);
  EXPECT_NE(encode_model(a.model), encode_model(c.model));
}

TEST(Train, Errors) {
  Dataset empty;
  empty.shape = {2, 2, 1};
  TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train(blob_model(), empty, empty, cfg), InputError);

  SplitMix64 rng(1);
  Dataset one_class;
  one_class.shape = {2, 2, 1};
  one_class.add(std::vector<double>(4, 0.1), 0);
  cfg.class_weights = {1.0, 2.0};
  EXPECT_THROW(train(blob_model(), one_class, empty, cfg), InputError);

  TrainConfig bad;
  bad.epochs = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.adam.beta1 = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.adam.learning_rate = 0;
  EXPECT_THROW(bad.validate(), ConfigError);

  Dataset wrong;
  wrong.shape = {3, 3, 1};
  wrong.add(std::vector<double>(9, 0.0), 0);
  EXPECT_THROW(train(blob_model(), wrong, empty, TrainConfig{}), StructuralError);
}

TEST(Metrics, RoundTrip) {
  std::vector<EpochMetrics> h{{1, 0.1, 0.5, std::nan(""), 0.25}, {2, 1.0 / 3.0, 1.0, 0.7, 0.125}};
  const auto text = format_metrics(h);
  EXPECT_EQ(text.substr(0, 2), "1,");
  const auto back = parse_metrics(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1], h[1]);
  EXPECT_TRUE(std::isnan(back[0].test_loss));
  EXPECT_THROW(parse_metrics("1,2,3\n"), FormatError);
}

TEST(Checkpoint, RoundTrip) {
  testing::TempDir dir("nn");
  SplitMix64 rng(8);
  for (const auto& spec : {stage1_cnn(), stage2_qnn(), blob_model()}) {
    auto model = TrainedModel::initialize(spec, rng.next());
    model.adam.step = 17;
    model.adam.first_moment[0].weights[0] = 0.25;
    save_model(dir / "m.qvmd", model);
    EXPECT_EQ(load_model(dir / "m.qvmd"), model);
  }
}

TEST(Checkpoint, RejectsDamage) {
  const auto bytes = encode_model(TrainedModel::initialize(blob_model(), 1));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_model(bad), FormatError);
  bad = bytes;
  bad[4] = 9;
  EXPECT_THROW(decode_model(bad), FormatError);
  bad = bytes;
  bad.resize(bad.size() - 3);
  EXPECT_THROW(decode_model(bad), FormatError);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(decode_model(bad), FormatError);
}

}  // namespace
}  // namespace qv::nn
