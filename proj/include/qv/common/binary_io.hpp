#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace qv {

// Fixed little-endian encoding helpers shared by the on-disk formats.

class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buffer_.insert(buffer_.end(), p, p + n);
  }

  template <typename T>
  void put(T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buffer_.push_back(static_cast<std::uint8_t>(
          static_cast<std::make_unsigned_t<T>>(value) >> (8 * i)));
    }
  }

  void f64(double value) { put(std::bit_cast<std::uint64_t>(value)); }

  void str(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  const std::vector<std::uint8_t>& data() const { return buffer_; }

 private:
  std::vector<std::uint8_t> buffer_;
};

/// Bounds-checked reader; every overrun raises FormatError.
class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}

  void bytes(void* out, std::size_t n);

  template <typename T>
  T get() {
    static_assert(std::is_integral_v<T>);
    std::array<std::uint8_t, sizeof(T)> raw{};
    bytes(raw.data(), raw.size());
    std::make_unsigned_t<T> v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::make_unsigned_t<T>>(raw[i]) << (8 * i);
    }
    return static_cast<T>(v);
  }

  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string str();

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames over the target, so concurrent
/// readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

/// Lowercase hex SHA-256 of a byte buffer.
std::array<std::uint8_t, 32> sha256(const std::vector<std::uint8_t>& bytes);
std::string to_hex(const std::uint8_t* data, std::size_t n);

}  // namespace qv
