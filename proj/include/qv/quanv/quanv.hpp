#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qv/imaging/image.hpp"
#include "qv/qsim/circuit.hpp"

namespace qv::quanv {

using Fingerprint = std::array<std::uint8_t, 32>;

struct QuanvConfig {
  int patch_size = 2;
  int stride = 2;
  int n_random_layers = 4;
  std::uint64_t seed = 0;

  int n_qubits() const noexcept { return patch_size * patch_size; }

  /// Throws ConfigError for non-positive sizes or more than 16 qubits.
  void validate() const;

  /// The two geometries used by the experiments (2x2 / 4 qubits and
  /// 4x4 / 16 qubits with stride equal to the patch).
  bool is_standard() const noexcept;

  /// Canonical text form; the fingerprint hashes exactly these bytes.
  std::string serialize() const;
  Fingerprint fingerprint() const;

  qsim::CircuitSpec circuit() const;

  bool operator==(const QuanvConfig&) const = default;
};

/// H' x W' x C grid of Pauli-Z expectations, row-major (row, col, channel).
struct QuantumTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;
  Fingerprint config_fingerprint{};
  std::string source_id;

  double at(int r, int c, int ch) const {
    return values[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }

  /// Source id is provenance only and does not take part in equality.
  bool operator==(const QuantumTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels &&
           values == o.values && config_fingerprint == o.config_fingerprint;
  }
};

/// floor((n - patch) / stride) + 1
int output_extent(int input_extent, int patch_size, int stride);

/// Reusable quanvolution engine: compiles the circuit once and scans any
/// number of images with it. One instance per thread.
class Quanvolver {
 public:
  explicit Quanvolver(const QuanvConfig& config);

  const QuanvConfig& config() const noexcept { return config_; }

  /// Throws InputError if the image is smaller than a patch or has samples
  /// outside [0, 1] by more than 1e-9.
  QuantumTensor apply(const imaging::Image& image, std::string source_id = {});

  std::uint64_t circuit_executions() const noexcept { return runner_.executions(); }

 private:
  QuanvConfig config_;
  Fingerprint fingerprint_;
  qsim::CircuitRunner runner_;
};

QuantumTensor quanvolve_image(const imaging::Image& image, const QuanvConfig& config,
                              std::string source_id = {});

struct BatchStats {
  std::size_t cache_hits = 0;
  std::size_t computed = 0;
  std::size_t cache_repairs = 0;
  std::uint64_t circuit_executions = 0;
  double wall_seconds = 0.0;
  double circuit_seconds = 0.0;  // time spent inside quanvolution proper
};

struct BatchResult {
  std::vector<QuantumTensor> tensors;
  BatchStats stats;
};

/// Cache key: SHA-256 over the config serialization followed by the image
/// bytes. Corrupt or mismatching cache entries are recomputed and replaced.
std::string cache_key(const QuanvConfig& config, const imaging::Image& image);

/// `source_ids` may be empty, in which case ids are "0", "1", ...
BatchResult quanvolve_batch(std::span<const imaging::Image> images,
                            std::span<const std::string> source_ids,
                            const QuanvConfig& config,
                            const std::filesystem::path& cache_dir);

// "QTNS" file format, see README.
std::vector<std::uint8_t> encode_tensor(const QuantumTensor& tensor);
QuantumTensor decode_tensor(std::vector<std::uint8_t> bytes);
void serialize_tensor(const QuantumTensor& tensor, const std::filesystem::path& path);
QuantumTensor deserialize_tensor(const std::filesystem::path& path);

}  // namespace qv::quanv
