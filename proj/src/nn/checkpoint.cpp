#include "qv/nn/checkpoint.hpp"

#include <cstring>

#include "qv/common/binary_io.hpp"
#include "qv/common/error.hpp"

namespace qv::nn {

namespace {

constexpr char kMagic[4] = {'Q', 'V', 'M', 'D'};
constexpr std::uint16_t kVersion = 1;

enum class LayerTag : std::uint8_t { kConv = 1, kPool, kFlatten, kDense, kDropout, kSoftmax };

void put_array(ByteWriter& w, const std::vector<double>& v) {
  w.put(static_cast<std::uint64_t>(v.size()));
  for (double x : v) w.f64(x);
}

std::vector<double> get_array(ByteReader& r) {
  const auto n = r.get<std::uint64_t>();
  if (n > r.remaining() / 8) throw FormatError("checkpoint array length exceeds file size");
  std::vector<double> v(n);
  for (auto& x : v) x = r.f64();
  return v;
}

void put_params(ByteWriter& w, const LayerParams& p) {
  put_array(w, p.weights);
  put_array(w, p.bias);
}

LayerParams get_params(ByteReader& r) {
  LayerParams p;
  p.weights = get_array(r);
  p.bias = get_array(r);
  return p;
}

void put_layer(ByteWriter& w, const LayerSpec& layer) {
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Conv2D>) {
          w.put(static_cast<std::uint8_t>(LayerTag::kConv));
          w.put(static_cast<std::int32_t>(l.filters));
          w.put(static_cast<std::int32_t>(l.kernel));
          w.put(static_cast<std::int32_t>(l.stride));
          w.put(static_cast<std::uint8_t>(l.padding));
          w.put(static_cast<std::uint8_t>(l.activation));
        } else if constexpr (std::is_same_v<T, MaxPool2D>) {
          w.put(static_cast<std::uint8_t>(LayerTag::kPool));
          w.put(static_cast<std::int32_t>(l.size));
        } else if constexpr (std::is_same_v<T, Flatten>) {
          w.put(static_cast<std::uint8_t>(LayerTag::kFlatten));
        } else if constexpr (std::is_same_v<T, Dense>) {
          w.put(static_cast<std::uint8_t>(LayerTag::kDense));
          w.put(static_cast<std::int32_t>(l.units));
          w.put(static_cast<std::uint8_t>(l.activation));
        } else if constexpr (std::is_same_v<T, Dropout>) {
          w.put(static_cast<std::uint8_t>(LayerTag::kDropout));
          w.f64(l.rate);
        } else {
          w.put(static_cast<std::uint8_t>(LayerTag::kSoftmax));
        }
      },
      layer);
}

Activation get_activation(ByteReader& r) {
  const auto a = r.get<std::uint8_t>();
  if (a > 1) throw FormatError("unknown activation code " + std::to_string(a));
  return static_cast<Activation>(a);
}

LayerSpec get_layer(ByteReader& r) {
  const auto tag = r.get<std::uint8_t>();
  switch (static_cast<LayerTag>(tag)) {
    case LayerTag::kConv: {
      Conv2D c;
      c.filters = r.get<std::int32_t>();
      c.kernel = r.get<std::int32_t>();
      c.stride = r.get<std::int32_t>();
      const auto pad = r.get<std::uint8_t>();
      if (pad > 1) throw FormatError("unknown padding code " + std::to_string(pad));
      c.padding = static_cast<PaddingMode>(pad);
      c.activation = get_activation(r);
      return c;
    }
    case LayerTag::kPool:
      return MaxPool2D{r.get<std::int32_t>()};
    case LayerTag::kFlatten:
      return Flatten{};
    case LayerTag::kDense: {
      Dense d;
      d.units = r.get<std::int32_t>();
      d.activation = get_activation(r);
      return d;
    }
    case LayerTag::kDropout:
      return Dropout{r.f64()};
    case LayerTag::kSoftmax:
      return Softmax{};
  }
  throw FormatError("unknown layer tag " + std::to_string(tag));
}

}  // namespace

std::vector<std::uint8_t> encode_model(const TrainedModel& model) {
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.put(kVersion);
  const auto& spec = model.spec;
  w.str(spec.name);
  w.put(static_cast<std::int32_t>(spec.input_shape.height));
  w.put(static_cast<std::int32_t>(spec.input_shape.width));
  w.put(static_cast<std::int32_t>(spec.input_shape.channels));
  w.put(spec.rng_seed);
  w.put(static_cast<std::int32_t>(spec.n_classes));
  w.put(static_cast<std::uint32_t>(spec.layers.size()));
  for (const auto& layer : spec.layers) put_layer(w, layer);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    put_params(w, model.params[i]);
    put_params(w, model.adam.first_moment[i]);
    put_params(w, model.adam.second_moment[i]);
  }
  w.put(model.adam.step);
  return w.data();
}

TrainedModel decode_model(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a model checkpoint (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  TrainedModel m;
  m.spec.name = r.str();
  m.spec.input_shape.height = r.get<std::int32_t>();
  m.spec.input_shape.width = r.get<std::int32_t>();
  m.spec.input_shape.channels = r.get<std::int32_t>();
  m.spec.rng_seed = r.get<std::uint64_t>();
  m.spec.n_classes = r.get<std::int32_t>();
  const auto n_layers = r.get<std::uint32_t>();
  if (n_layers > r.remaining()) throw FormatError("checkpoint layer count exceeds file size");
  for (std::uint32_t i = 0; i < n_layers; ++i) m.spec.layers.push_back(get_layer(r));
  try {
    m.spec.validate();
  } catch (const StructuralError& e) {
    throw FormatError(std::string("checkpoint holds an invalid model: ") + e.what());
  }
  // Allocated shapes come from a fresh initialization of the decoded spec.
  const TrainedModel shape_ref = TrainedModel::initialize(m.spec, 0);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    m.params.push_back(get_params(r));
    m.adam.first_moment.push_back(get_params(r));
    m.adam.second_moment.push_back(get_params(r));
    const auto& ref = shape_ref.params[i];
    for (const LayerParams* p : {&m.params[i], &m.adam.first_moment[i], &m.adam.second_moment[i]}) {
      if (p->weights.size() != ref.weights.size() || p->bias.size() != ref.bias.size()) {
        throw FormatError("checkpoint parameters for layer " + std::to_string(i) +
                          " do not match its spec");
      }
    }
  }
  m.adam.step = r.get<std::uint64_t>();
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint");
  return m;
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  write_file_atomic(path, encode_model(model));
}

TrainedModel load_model(const std::filesystem::path& path) {
  return decode_model(read_file_bytes(path));
}

}  // namespace qv::nn
