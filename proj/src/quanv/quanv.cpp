#include "qv/quanv/quanv.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qv/common/binary_io.hpp"
#include "qv/common/error.hpp"

namespace qv::quanv {

namespace {

constexpr char kMagic[4] = {'Q', 'T', 'N', 'S'};
constexpr std::uint16_t kFormatVersion = 1;

}  // namespace

void QuanvConfig::validate() const {
  if (patch_size < 1) throw ConfigError("patch_size must be positive");
  if (stride < 1) throw ConfigError("stride must be positive");
  if (n_random_layers < 0) throw ConfigError("n_random_layers must be >= 0");
  if (n_qubits() > qsim::kMaxQubits) {
    throw ConfigError("patch_size " + std::to_string(patch_size) + " needs " +
                      std::to_string(n_qubits()) + " qubits; the simulator supports 16");
  }
}

bool QuanvConfig::is_standard() const noexcept {
  return (patch_size == 2 || patch_size == 4) && stride == patch_size;
}

std::string QuanvConfig::serialize() const {
  std::ostringstream out;
  out << "quanv/v1 patch=" << patch_size << " stride=" << stride
      << " layers=" << n_random_layers << " seed=" << seed << " qubits=" << n_qubits();
  return out.str();
}

Fingerprint QuanvConfig::fingerprint() const {
  const std::string s = serialize();
  return sha256(std::vector<std::uint8_t>(s.begin(), s.end()));
}

qsim::CircuitSpec QuanvConfig::circuit() const {
  validate();
  return qsim::CircuitSpec::random(n_qubits(), n_random_layers, seed);
}

int output_extent(int input_extent, int patch_size, int stride) {
  if (input_extent < patch_size) return 0;
  return (input_extent - patch_size) / stride + 1;
}

Quanvolver::Quanvolver(const QuanvConfig& config)
    : config_(config), fingerprint_(config.fingerprint()), runner_(config.circuit()) {
  if (!config_.is_standard()) {
    spdlog::warn("nonstandard quanvolution geometry: {}", config_.serialize());
  }
}

QuantumTensor Quanvolver::apply(const imaging::Image& image, std::string source_id) {
  const int k = config_.patch_size;
  if (image.height < k || image.width < k) {
    throw InputError("image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                     " is smaller than the " + std::to_string(k) + "x" + std::to_string(k) +
                     " patch");
  }
  for (double v : image.pixels) {
    if (!(v >= -1e-9 && v <= 1.0 + 1e-9)) {
      throw InputError("image samples must be normalized to [0, 1]");
    }
  }

  QuantumTensor out;
  out.height = output_extent(image.height, k, config_.stride);
  out.width = output_extent(image.width, k, config_.stride);
  out.channels = config_.n_qubits();
  out.values.resize(static_cast<std::size_t>(out.height) * out.width * out.channels);
  out.config_fingerprint = fingerprint_;
  out.source_id = std::move(source_id);

  std::vector<double> angles(static_cast<std::size_t>(out.channels));
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      // Row-major patch flattening: qubit i <- pixel (i / k, i % k).
      for (int i = 0; i < out.channels; ++i) {
        const double p = std::clamp(image.at(r * config_.stride + i / k, c * config_.stride + i % k),
                                    0.0, 1.0);
        angles[i] = std::numbers::pi * p;
      }
      const std::size_t offset = (static_cast<std::size_t>(r) * out.width + c) * out.channels;
      runner_.run(angles, std::span<double>(out.values).subspan(offset, out.channels));
    }
  }
  return out;
}

QuantumTensor quanvolve_image(const imaging::Image& image, const QuanvConfig& config,
                              std::string source_id) {
  Quanvolver q(config);
  return q.apply(image, std::move(source_id));
}

std::string cache_key(const QuanvConfig& config, const imaging::Image& image) {
  ByteWriter w;
  const std::string s = config.serialize();
  w.bytes(s.data(), s.size());
  w.put(static_cast<std::uint32_t>(image.height));
  w.put(static_cast<std::uint32_t>(image.width));
  for (double v : image.pixels) w.f64(v);
  const auto digest = sha256(w.data());
  return to_hex(digest.data(), digest.size());
}

BatchResult quanvolve_batch(std::span<const imaging::Image> images,
                            std::span<const std::string> source_ids,
                            const QuanvConfig& config,
                            const std::filesystem::path& cache_dir) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  if (!source_ids.empty() && source_ids.size() != images.size()) {
    throw StructuralError("source id count does not match image count");
  }
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  if (ec) throw IoError("cannot create cache directory " + cache_dir.string());

  const Fingerprint fingerprint = config.fingerprint();
  Quanvolver quanvolver(config);
  BatchResult result;
  result.tensors.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::string id = source_ids.empty() ? std::to_string(i) : source_ids[i];
    const auto path = cache_dir / (cache_key(config, images[i]) + ".qtns");
    if (std::filesystem::exists(path)) {
      try {
        QuantumTensor cached = deserialize_tensor(path);
        if (cached.config_fingerprint != fingerprint) {
          throw CacheError("fingerprint mismatch in " + path.string());
        }
        cached.source_id = std::move(id);
        result.tensors.push_back(std::move(cached));
        ++result.stats.cache_hits;
        continue;
      } catch (const Error& e) {
        spdlog::warn("discarding cache entry {}: {}", path.filename().string(), e.what());
        ++result.stats.cache_repairs;
      }
    }
    const auto t0 = Clock::now();
    QuantumTensor t = quanvolver.apply(images[i], std::move(id));
    result.stats.circuit_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
    serialize_tensor(t, path);
    result.tensors.push_back(std::move(t));
    ++result.stats.computed;
  }
  result.stats.circuit_executions = quanvolver.circuit_executions();
  result.stats.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

std::vector<std::uint8_t> encode_tensor(const QuantumTensor& tensor) {
  const std::size_t expected =
      static_cast<std::size_t>(tensor.height) * tensor.width * tensor.channels;
  if (tensor.values.size() != expected) throw StructuralError("tensor value count mismatch");
  ByteWriter w;
  w.bytes(kMagic, sizeof kMagic);
  w.put(kFormatVersion);
  w.put(static_cast<std::uint32_t>(tensor.height));
  w.put(static_cast<std::uint32_t>(tensor.width));
  w.put(static_cast<std::uint32_t>(tensor.channels));
  w.bytes(tensor.config_fingerprint.data(), tensor.config_fingerprint.size());
  for (double v : tensor.values) w.f64(v);
  return w.data();
}

QuantumTensor decode_tensor(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  char magic[4];
  r.bytes(magic, sizeof magic);
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("bad magic, not a QTNS file");
  const auto version = r.get<std::uint16_t>();
  if (version != kFormatVersion) {
    throw FormatError("unsupported QTNS version " + std::to_string(version));
  }
  QuantumTensor t;
  t.height = static_cast<int>(r.get<std::uint32_t>());
  t.width = static_cast<int>(r.get<std::uint32_t>());
  t.channels = static_cast<int>(r.get<std::uint32_t>());
  r.bytes(t.config_fingerprint.data(), t.config_fingerprint.size());
  const std::size_t count = static_cast<std::size_t>(t.height) * t.width * t.channels;
  if (r.remaining() != count * 8) {
    throw FormatError("QTNS payload holds " + std::to_string(r.remaining()) + " bytes, expected " +
                      std::to_string(count * 8));
  }
  t.values.resize(count);
  for (auto& v : t.values) v = r.f64();
  return t;
}

void serialize_tensor(const QuantumTensor& tensor, const std::filesystem::path& path) {
  write_file_atomic(path, encode_tensor(tensor));
}

QuantumTensor deserialize_tensor(const std::filesystem::path& path) {
  QuantumTensor t = decode_tensor(read_file_bytes(path));
  t.source_id = path.stem().string();
  return t;
}

}  // namespace qv::quanv
