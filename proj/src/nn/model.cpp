#include "qv/nn/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "qv/common/error.hpp"
#include "qv/common/rng.hpp"

namespace qv::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstRowVector = Eigen::Map<const Eigen::RowVectorXd>;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

struct ConvGeometry {
  int out_h, out_w, pad_top, pad_left, patch;  // patch = kernel^2 * in_channels
};

ConvGeometry conv_geometry(const Shape3& in, const Conv2D& c) {
  ConvGeometry g{};
  g.out_h = conv_output_extent(in.height, c.kernel, c.stride, c.padding);
  g.out_w = conv_output_extent(in.width, c.kernel, c.stride, c.padding);
  if (c.padding == PaddingMode::kSame) {
    // Extra padding goes after, as in TensorFlow.
    g.pad_top = std::max((g.out_h - 1) * c.stride + c.kernel - in.height, 0) / 2;
    g.pad_left = std::max((g.out_w - 1) * c.stride + c.kernel - in.width, 0) / 2;
  }
  g.patch = c.kernel * c.kernel * in.channels;
  return g;
}

// Patch matrix for examples [first, last): one row per output position,
// laid out [ky][kx][channel] to match the HWIO weights. Each kernel row is a
// contiguous run of the input, so it is copied in one piece.
void im2col(const Tensor4& in, const Conv2D& c, const ConvGeometry& g, int first, int last,
            double* col) {
  const int cin = in.shape.channels;
  const int span = c.kernel * cin;
  for (int n = first; n < last; ++n) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox, col += g.patch) {
        const int x0 = ox * c.stride - g.pad_left;
        const int kx_lo = std::max(0, -x0);
        const int kx_hi = std::min(c.kernel, in.shape.width - x0);
        for (int ky = 0; ky < c.kernel; ++ky) {
          double* dst = col + ky * span;
          const int iy = oy * c.stride + ky - g.pad_top;
          if (iy < 0 || iy >= in.shape.height || kx_lo >= kx_hi) {
            std::fill_n(dst, span, 0.0);
            continue;
          }
          std::fill_n(dst, kx_lo * cin, 0.0);
          const double* src =
              in.values.data() +
              ((static_cast<std::size_t>(n) * in.shape.height + iy) * in.shape.width + x0 + kx_lo) * cin;
          std::copy_n(src, (kx_hi - kx_lo) * cin, dst + kx_lo * cin);
          std::fill_n(dst + kx_hi * cin, (c.kernel - kx_hi) * cin, 0.0);
        }
      }
    }
  }
}

void col2im(const std::vector<double>& col, const Conv2D& c, const ConvGeometry& g, Tensor4& out) {
  const int cin = out.shape.channels;
  const double* row = col.data();
  for (int n = 0; n < out.batch; ++n) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox, row += g.patch) {
        for (int ky = 0; ky < c.kernel; ++ky) {
          const int iy = oy * c.stride + ky - g.pad_top;
          if (iy < 0 || iy >= out.shape.height) continue;
          for (int kx = 0; kx < c.kernel; ++kx) {
            const int ix = ox * c.stride + kx - g.pad_left;
            if (ix < 0 || ix >= out.shape.width) continue;
            double* dst = &out.at(n, iy, ix, 0);
            const double* src = row + (ky * c.kernel + kx) * cin;
            for (int ch = 0; ch < cin; ++ch) dst[ch] += src[ch];
          }
        }
      }
    }
  }
}

void relu_inplace(std::vector<double>& v) {
  for (auto& x : v) x = x > 0.0 ? x : 0.0;
}

// Zeroes gradient entries whose forward output was clipped by ReLU.
void relu_backward(const std::vector<double>& output, std::vector<double>& grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(output[i] > 0.0)) grad[i] = 0.0;
  }
}

// Plain sequential sums; vectorized reductions can change their summation
// order with buffer alignment, which would break run-to-run reproducibility.
void column_sums(const std::vector<double>& m, int cols, std::vector<double>& out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < m.size(); ++k) out[k % static_cast<std::size_t>(cols)] += m[k];
}

struct LayerCache {
  Tensor4 output;
  std::vector<double> col;            // conv: im2col of the input
  std::vector<std::uint32_t> argmax;  // pool: input offset per output element
  std::vector<double> mask;           // dropout
};

// Resizes in place so repeated passes reuse the same allocations.
void reshape(Tensor4& t, int batch, Shape3 shape) {
  t.batch = batch;
  t.shape = shape;
  t.values.resize(static_cast<std::size_t>(batch) * shape.size());
}

class Pass {
 public:
  Pass(const TrainedModel& model, bool training, std::uint64_t seed, bool keep_columns,
       std::vector<LayerCache>* workspace = nullptr)
      : model_(model), training_(training), seed_(seed), keep_columns_(keep_columns),
        caches_(workspace ? *workspace : owned_) {}

  const Tensor4& run(const Tensor4& input) {
    const auto& spec = model_.spec;
    if (input.shape != spec.input_shape) {
      throw StructuralError(spec.name + " expects input " + spec.input_shape.str() + ", got " +
                            input.shape.str());
    }
    if (input.values.size() != static_cast<std::size_t>(input.batch) * input.shape.size()) {
      throw StructuralError("batch value count does not match its shape");
    }
    check_finite(input.values, "input");
    caches_.resize(spec.layers.size());
    const Tensor4* cur = &input;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      LayerCache& cache = caches_[i];
      forward_layer(i, *cur, cache);
      check_finite(cache.output.values, std::to_string(i) + " (" + layer_name(spec.layers[i]) + ")");
      cur = &cache.output;
    }
    return *cur;
  }

  const LayerCache& cache(std::size_t i) const { return caches_[i]; }

 private:
  void check_finite(const std::vector<double>& v, const std::string& where) const {
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw NumericError("non-finite activation in " + model_.spec.name + " layer " + where);
      }
    }
  }

  void forward_layer(std::size_t i, const Tensor4& in, LayerCache& cache) {
    const LayerParams& p = model_.params[i];
    std::visit(
        Overloaded{
            [&](const Conv2D& c) {
              const auto g = conv_geometry(in.shape, c);
              reshape(cache.output, in.batch, {g.out_h, g.out_w, c.filters});
              const Eigen::Index per_example = static_cast<Eigen::Index>(g.out_h) * g.out_w;
              ConstMatrixMap w(p.weights.data(), g.patch, c.filters);
              if (keep_columns_) {
                // Backward needs the whole patch matrix.
                cache.col.resize(static_cast<std::size_t>(in.batch * per_example) * g.patch);
                im2col(in, c, g, 0, in.batch, cache.col.data());
                MatrixMap(cache.output.values.data(), in.batch * per_example, c.filters).noalias() =
                    ConstMatrixMap(cache.col.data(), in.batch * per_example, g.patch) * w;
              } else {
                // One example at a time keeps the patch matrix cache-resident.
                cache.col.resize(static_cast<std::size_t>(per_example) * g.patch);
                for (int n = 0; n < in.batch; ++n) {
                  im2col(in, c, g, n, n + 1, cache.col.data());
                  MatrixMap(cache.output.values.data() + n * per_example * c.filters, per_example,
                            c.filters)
                      .noalias() = ConstMatrixMap(cache.col.data(), per_example, g.patch) * w;
                }
              }
              MatrixMap out(cache.output.values.data(), in.batch * per_example, c.filters);
              out.rowwise() += ConstRowVector(p.bias.data(), c.filters);
              if (c.activation == Activation::kRelu) relu_inplace(cache.output.values);
            },
            [&](const MaxPool2D& mp) {
              const int s = mp.size;
              const Shape3 os{in.shape.height / s, in.shape.width / s, in.shape.channels};
              reshape(cache.output, in.batch, os);
              cache.argmax.resize(cache.output.values.size());
              std::size_t o = 0;
              for (int n = 0; n < in.batch; ++n) {
                for (int oy = 0; oy < os.height; ++oy) {
                  for (int ox = 0; ox < os.width; ++ox) {
                    for (int ch = 0; ch < os.channels; ++ch, ++o) {
                      double best = -std::numeric_limits<double>::infinity();
                      std::size_t best_at = 0;
                      for (int dy = 0; dy < s; ++dy) {
                        for (int dx = 0; dx < s; ++dx) {
                          const std::size_t at =
                              ((static_cast<std::size_t>(n) * in.shape.height + oy * s + dy) *
                                   in.shape.width + ox * s + dx) * in.shape.channels + ch;
                          if (in.values[at] > best) {
                            best = in.values[at];
                            best_at = at;
                          }
                        }
                      }
                      cache.output.values[o] = best;
                      cache.argmax[o] = static_cast<std::uint32_t>(best_at);
                    }
                  }
                }
              }
            },
            [&](const Flatten&) {
              cache.output = in;
              cache.output.shape = {1, 1, static_cast<int>(in.shape.size())};
            },
            [&](const Dense& d) {
              const int fan_in = static_cast<int>(in.shape.size());
              reshape(cache.output, in.batch, {1, 1, d.units});
              ConstMatrixMap x(in.values.data(), in.batch, fan_in);
              ConstMatrixMap w(p.weights.data(), fan_in, d.units);
              MatrixMap out(cache.output.values.data(), in.batch, d.units);
              out.noalias() = x * w;
              out.rowwise() += ConstRowVector(p.bias.data(), d.units);
              if (d.activation == Activation::kRelu) relu_inplace(cache.output.values);
            },
            [&](const Dropout& d) {
              cache.output = in;
              cache.mask.clear();
              if (!training_ || d.rate == 0.0) return;
              SplitMix64 rng(derive_seed(seed_, i));
              const double scale = 1.0 / (1.0 - d.rate);
              cache.mask.resize(in.values.size());
              for (std::size_t k = 0; k < cache.mask.size(); ++k) {
                cache.mask[k] = rng.uniform() < d.rate ? 0.0 : scale;
                cache.output.values[k] *= cache.mask[k];
              }
            },
            [&](const Softmax&) {
              cache.output = in;
              const int classes = in.shape.channels;
              for (int n = 0; n < in.batch; ++n) {
                double* row = cache.output.example(n);
                const double mx = *std::max_element(row, row + classes);
                double sum = 0.0;
                for (int c = 0; c < classes; ++c) {
                  row[c] = std::exp(row[c] - mx);
                  sum += row[c];
                }
                for (int c = 0; c < classes; ++c) row[c] /= sum;
              }
            },
        },
        model_.spec.layers[i]);
  }

  const TrainedModel& model_;
  bool training_;
  std::uint64_t seed_;
  bool keep_columns_;
  std::vector<LayerCache> owned_;
  std::vector<LayerCache>& caches_;
};

double class_weight(std::span<const double> weights, int label) {
  return weights.empty() ? 1.0 : weights[static_cast<std::size_t>(label)];
}

void check_labels(const Tensor4& probs, std::span<const int> labels,
                  std::span<const double> class_weights, std::span<const double> sample_weights) {
  if (labels.size() != static_cast<std::size_t>(probs.batch)) {
    throw StructuralError("label count " + std::to_string(labels.size()) +
                          " does not match batch size " + std::to_string(probs.batch));
  }
  const int classes = probs.shape.channels;
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw InputError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  if (!class_weights.empty() && class_weights.size() != static_cast<std::size_t>(classes)) {
    throw StructuralError("expected one class weight per class");
  }
  if (!sample_weights.empty() && sample_weights.size() != labels.size()) {
    throw StructuralError("expected one sample weight per example");
  }
}

}  // namespace

TrainedModel TrainedModel::initialize(const ModelSpec& spec, std::uint64_t seed) {
  const auto shapes = infer_shapes(spec);
  TrainedModel model;
  model.spec = spec;
  model.params.resize(spec.layers.size());
  Shape3 in = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    if (const auto* c = std::get_if<Conv2D>(&spec.layers[i])) {
      fan_in = static_cast<std::size_t>(c->kernel) * c->kernel * in.channels;
      fan_out = static_cast<std::size_t>(c->filters);
    } else if (const auto* d = std::get_if<Dense>(&spec.layers[i])) {
      fan_in = in.size();
      fan_out = static_cast<std::size_t>(d->units);
    }
    if (fan_in > 0) {
      SplitMix64 rng(derive_seed(seed, i));
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      auto& p = model.params[i];
      p.weights.resize(fan_in * fan_out);
      for (auto& w : p.weights) w = rng.uniform(-limit, limit);
      p.bias.assign(fan_out, 0.0);
    }
    in = shapes[i];
  }
  model.adam.first_moment.resize(model.params.size());
  model.adam.second_moment.resize(model.params.size());
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    for (auto* m : {&model.adam.first_moment[i], &model.adam.second_moment[i]}) {
      m->weights.assign(model.params[i].weights.size(), 0.0);
      m->bias.assign(model.params[i].bias.size(), 0.0);
    }
  }
  return model;
}

std::size_t TrainedModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

Tensor4 forward(const TrainedModel& model, const Tensor4& batch, bool training,
                std::uint64_t dropout_seed) {
  thread_local std::vector<LayerCache> workspace;
  Pass pass(model, training, dropout_seed, /*keep_columns=*/false, &workspace);
  return pass.run(batch);
}

double loss(const Tensor4& probs, std::span<const int> labels,
            std::span<const double> class_weights, std::span<const double> sample_weights) {
  check_labels(probs, labels, class_weights, sample_weights);
  if (probs.batch == 0) return 0.0;
  double total = 0.0;
  for (int n = 0; n < probs.batch; ++n) {
    const int y = labels[n];
    const double w = class_weight(class_weights, y) * (sample_weights.empty() ? 1.0 : sample_weights[n]);
    total += -w * std::log(std::max(probs.example(n)[y], kProbabilityFloor));
  }
  return total / probs.batch;
}

BackwardResult backward(const TrainedModel& model, const Tensor4& batch,
                        std::span<const int> labels, std::span<const double> class_weights,
                        std::uint64_t dropout_seed, std::span<const double> sample_weights) {
  const auto& spec = model.spec;
  Pass pass(model, /*training=*/true, dropout_seed, /*keep_columns=*/true);
  const Tensor4& probs = pass.run(batch);
  check_labels(probs, labels, class_weights, sample_weights);

  BackwardResult result;
  result.probabilities = probs;
  result.loss = loss(probs, labels, class_weights, sample_weights);
  result.gradients.resize(spec.layers.size());

  // Softmax + cross-entropy: d/dlogits = w/N * (p - onehot(y)). Below the
  // probability floor the clamped loss is flat, so the gradient is zero.
  const int classes = probs.shape.channels;
  Tensor4 grad(probs.batch, probs.shape);
  for (int n = 0; n < probs.batch; ++n) {
    const int y = labels[n];
    const double* p = probs.example(n);
    if (p[y] < kProbabilityFloor) continue;
    const double w = class_weight(class_weights, y) *
                     (sample_weights.empty() ? 1.0 : sample_weights[n]) / probs.batch;
    double* g = grad.example(n);
    for (int c = 0; c < classes; ++c) g[c] = w * (p[c] - (c == y ? 1.0 : 0.0));
  }

  for (std::size_t idx = spec.layers.size() - 1; idx-- > 0;) {
    const Tensor4& input = idx == 0 ? batch : pass.cache(idx - 1).output;
    const LayerCache& cache = pass.cache(idx);
    const LayerParams& p = model.params[idx];
    LayerParams& gp = result.gradients[idx];
    const bool need_input_grad = idx > 0;
    Tensor4 grad_in;
    std::visit(
        Overloaded{
            [&](const Conv2D& c) {
              if (c.activation == Activation::kRelu) relu_backward(cache.output.values, grad.values);
              const auto g = conv_geometry(input.shape, c);
              const Eigen::Index rows = static_cast<Eigen::Index>(input.batch) * g.out_h * g.out_w;
              ConstMatrixMap col(cache.col.data(), rows, g.patch);
              ConstMatrixMap dout(grad.values.data(), rows, c.filters);
              gp.weights.resize(p.weights.size());
              gp.bias.resize(p.bias.size());
              MatrixMap(gp.weights.data(), g.patch, c.filters).noalias() = col.transpose() * dout;
              column_sums(grad.values, c.filters, gp.bias);
              if (!need_input_grad) return;
              std::vector<double> dcol(cache.col.size());
              MatrixMap(dcol.data(), rows, g.patch).noalias() =
                  dout * ConstMatrixMap(p.weights.data(), g.patch, c.filters).transpose();
              grad_in = Tensor4(input.batch, input.shape);
              col2im(dcol, c, g, grad_in);
            },
            [&](const MaxPool2D&) {
              grad_in = Tensor4(input.batch, input.shape);
              for (std::size_t o = 0; o < grad.values.size(); ++o) {
                grad_in.values[cache.argmax[o]] += grad.values[o];
              }
            },
            [&](const Flatten&) {
              grad_in = std::move(grad);
              grad_in.shape = input.shape;
            },
            [&](const Dense& d) {
              if (d.activation == Activation::kRelu) relu_backward(cache.output.values, grad.values);
              const int fan_in = static_cast<int>(input.shape.size());
              ConstMatrixMap x(input.values.data(), input.batch, fan_in);
              ConstMatrixMap dout(grad.values.data(), input.batch, d.units);
              gp.weights.resize(p.weights.size());
              gp.bias.resize(p.bias.size());
              MatrixMap(gp.weights.data(), fan_in, d.units).noalias() = x.transpose() * dout;
              column_sums(grad.values, d.units, gp.bias);
              if (!need_input_grad) return;
              grad_in = Tensor4(input.batch, input.shape);
              MatrixMap(grad_in.values.data(), input.batch, fan_in).noalias() =
                  dout * ConstMatrixMap(p.weights.data(), fan_in, d.units).transpose();
            },
            [&](const Dropout&) {
              grad_in = std::move(grad);
              if (!cache.mask.empty()) {
                for (std::size_t k = 0; k < grad_in.values.size(); ++k) grad_in.values[k] *= cache.mask[k];
              }
            },
            [&](const Softmax&) {
              throw StructuralError("softmax must be the last layer");
            },
        },
        spec.layers[idx]);
    grad = std::move(grad_in);
  }
  return result;
}

}  // namespace qv::nn
