#include "qv/common/binary_io.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "qv/common/error.hpp"

namespace qv {

void ByteReader::bytes(void* out, std::size_t n) {
  if (n > remaining()) {
    throw FormatError("unexpected end of data (wanted " + std::to_string(n) +
                      " bytes, " + std::to_string(remaining()) + " left)");
  }
  std::memcpy(out, data_.data() + pos_, n);
  pos_ += n;
}

std::string ByteReader::str() {
  const auto n = get<std::uint32_t>();
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

namespace {

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
  static std::atomic<unsigned> counter{0};
  std::ostringstream name;
  name << path.filename().string() << ".tmp."
       << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "."
       << counter.fetch_add(1);
  return path.parent_path() / name.str();
}

void write_raw_atomic(const std::filesystem::path& path, const char* data,
                      std::size_t n) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const auto tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(data, static_cast<std::streamsize>(n));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes) {
  write_raw_atomic(path, reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_raw_atomic(path, text.data(), text.size());
}

std::array<std::uint8_t, 32> sha256(const std::vector<std::uint8_t>& bytes) {
  std::array<std::uint8_t, 32> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != digest.size()) {
    throw Error(ErrorKind::kIo, "SHA-256 computation failed");
  }
  return digest;
}

std::string to_hex(const std::uint8_t* data, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 0xF]);
  }
  return out;
}

}  // namespace qv
