#include "qv/nn/model_spec.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qv/common/error.hpp"

namespace qv::nn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const char* activation_suffix(Activation a) { return a == Activation::kRelu ? ", relu" : ""; }

}  // namespace

std::string Shape3::str() const {
  return "(" + std::to_string(height) + ", " + std::to_string(width) + ", " +
         std::to_string(channels) + ")";
}

std::string layer_name(const LayerSpec& layer) {
  return std::visit(
      Overloaded{
          [](const Conv2D& c) {
            return "conv2d(" + std::to_string(c.filters) + ", k=" + std::to_string(c.kernel) +
                   (c.stride != 1 ? ", s=" + std::to_string(c.stride) : std::string()) +
                   (c.padding == PaddingMode::kSame ? ", same" : ", valid") +
                   activation_suffix(c.activation) + ")";
          },
          [](const MaxPool2D& p) { return "max_pooling2d(" + std::to_string(p.size) + ")"; },
          [](const Flatten&) { return std::string("flatten"); },
          [](const Dense& d) {
            return "dense(" + std::to_string(d.units) + activation_suffix(d.activation) + ")";
          },
          [](const Dropout& d) {
            std::ostringstream s;
            s << "dropout(" << d.rate << ")";
            return s.str();
          },
          [](const Softmax&) { return std::string("softmax"); },
      },
      layer);
}

int conv_output_extent(int input, int kernel, int stride, PaddingMode padding) {
  if (padding == PaddingMode::kSame) return (input + stride - 1) / stride;
  if (input < kernel) return 0;
  return (input - kernel) / stride + 1;
}

std::vector<Shape3> infer_shapes(const ModelSpec& spec) {
  auto fail = [&](std::size_t i, const std::string& why) {
    throw StructuralError(spec.name + " layer " + std::to_string(i) + " (" +
                          layer_name(spec.layers[i]) + "): " + why);
  };
  if (spec.input_shape.height < 1 || spec.input_shape.width < 1 || spec.input_shape.channels < 1) {
    throw StructuralError(spec.name + ": input shape must be positive");
  }
  if (spec.layers.empty()) throw StructuralError(spec.name + ": no layers");

  std::vector<Shape3> shapes;
  Shape3 cur = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const bool flat = cur.height == 1 && cur.width == 1;
    std::visit(
        Overloaded{
            [&](const Conv2D& c) {
              if (c.filters < 1 || c.kernel < 1 || c.stride < 1) fail(i, "sizes must be positive");
              const int h = conv_output_extent(cur.height, c.kernel, c.stride, c.padding);
              const int w = conv_output_extent(cur.width, c.kernel, c.stride, c.padding);
              if (h < 1 || w < 1) fail(i, "input " + cur.str() + " smaller than kernel");
              cur = {h, w, c.filters};
            },
            [&](const MaxPool2D& p) {
              if (p.size < 1) fail(i, "pool size must be positive");
              if (cur.height < p.size || cur.width < p.size) fail(i, "input " + cur.str() + " smaller than pool");
              cur = {cur.height / p.size, cur.width / p.size, cur.channels};
            },
            [&](const Flatten&) { cur = {1, 1, static_cast<int>(cur.size())}; },
            [&](const Dense& d) {
              if (!flat) fail(i, "dense input " + cur.str() + " must be flattened first");
              if (d.units < 1) fail(i, "units must be positive");
              cur = {1, 1, d.units};
            },
            [&](const Dropout& d) {
              if (!(d.rate >= 0.0 && d.rate < 1.0)) fail(i, "rate must lie in [0, 1)");
            },
            [&](const Softmax&) {
              if (!flat) fail(i, "softmax input must be flat");
              if (i + 1 != spec.layers.size()) fail(i, "softmax must be the last layer");
            },
        },
        spec.layers[i]);
    shapes.push_back(cur);
  }
  if (!std::holds_alternative<Softmax>(spec.layers.back())) {
    throw StructuralError(spec.name + ": the stack must end in softmax");
  }
  if (cur.channels != spec.n_classes) {
    throw StructuralError(spec.name + ": final width " + std::to_string(cur.channels) +
                          " does not match class count " + std::to_string(spec.n_classes));
  }
  return shapes;
}

void ModelSpec::validate() const { infer_shapes(*this); }

ParameterCount count_parameters(const ModelSpec& spec) {
  const auto shapes = infer_shapes(spec);
  ParameterCount out;
  Shape3 in = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    std::size_t params = 0;
    if (const auto* c = std::get_if<Conv2D>(&spec.layers[i])) {
      params = static_cast<std::size_t>(c->filters) *
               (static_cast<std::size_t>(c->kernel) * c->kernel * in.channels + 1);
    } else if (const auto* d = std::get_if<Dense>(&spec.layers[i])) {
      params = static_cast<std::size_t>(d->units) * (in.size() + 1);
    } else if (std::holds_alternative<Flatten>(spec.layers[i]) && out.flatten_width == 0) {
      out.flatten_width = shapes[i].size();
    }
    out.layers.push_back({layer_name(spec.layers[i]), shapes[i], params});
    out.total += params;
    in = shapes[i];
  }
  return out;
}

std::string summarize(const ModelSpec& spec) {
  const auto count = count_parameters(spec);
  std::ostringstream out;
  out << "Model: " << spec.name << "  input " << spec.input_shape.str() << "\n";
  for (const auto& l : count.layers) {
    out << "  " << l.name;
    for (std::size_t pad = l.name.size(); pad < 40; ++pad) out << ' ';
    out << l.output.str();
    for (std::size_t pad = l.output.str().size(); pad < 16; ++pad) out << ' ';
    out << l.parameters << "\n";
  }
  out << "  trainable parameters: " << count.total << "\n";
  return out.str();
}

namespace {

void append_head(ModelSpec& spec, int dense_units, double dropout) {
  spec.layers.push_back(Flatten{});
  spec.layers.push_back(Dense{dense_units, Activation::kRelu});
  spec.layers.push_back(Dropout{dropout});
  spec.layers.push_back(Dense{2, Activation::kLinear});
  spec.layers.push_back(Softmax{});
}

}  // namespace

ModelSpec stage1_cnn(int image_size, int dense_units, double dropout) {
  ModelSpec spec;
  spec.name = "stage1-cnn";
  spec.input_shape = {image_size, image_size, 1};
  spec.layers = {
      Conv2D{32, 4, 1, PaddingMode::kSame, Activation::kRelu},
      MaxPool2D{2},
      Conv2D{16, 4, 1, PaddingMode::kSame, Activation::kRelu},
      MaxPool2D{2},
  };
  append_head(spec, dense_units, dropout);
  return spec;
}

ModelSpec stage1_qnn(Shape3 quantum_shape, int dense_units, double dropout) {
  ModelSpec spec;
  spec.name = "stage1-qnn";
  spec.input_shape = quantum_shape;
  spec.layers = {
      Conv2D{32, 3, 1, PaddingMode::kValid, Activation::kRelu},
      MaxPool2D{2},
  };
  append_head(spec, dense_units, dropout);
  return spec;
}

ModelSpec stage2_cnn(int region_size, int dense_units, double dropout) {
  ModelSpec spec;
  spec.name = "stage2-cnn";
  spec.input_shape = {region_size, region_size, 1};
  const int first_pool = std::clamp(region_size, 1, 4);
  const int second_pool = std::clamp(region_size / first_pool, 1, 2);
  spec.layers = {
      Conv2D{16, 4, 1, PaddingMode::kSame, Activation::kRelu},
      MaxPool2D{first_pool},
      Conv2D{32, 2, 1, PaddingMode::kSame, Activation::kRelu},
      MaxPool2D{second_pool},
  };
  append_head(spec, dense_units, dropout);
  return spec;
}

ModelSpec stage2_qnn(Shape3 quantum_shape, int dense_units, double dropout) {
  ModelSpec spec;
  spec.name = "stage2-qnn";
  spec.input_shape = quantum_shape;
  spec.layers = {
      Conv2D{32, 2, 1, PaddingMode::kSame, Activation::kRelu},
      MaxPool2D{std::clamp(std::min(quantum_shape.height, quantum_shape.width), 1, 2)},
  };
  append_head(spec, dense_units, dropout);
  return spec;
}

}  // namespace qv::nn
