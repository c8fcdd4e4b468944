#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace monolab {

// Little-endian primitive writer; byte order is fixed regardless of host.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}
  void bytes(const void* data, std::size_t len);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);

 private:
  std::ostream& out_;
};

// Reader counterpart. Short reads raise FormatError naming the source.
class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string source);
  void bytes(void* data, std::size_t len);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::uint64_t remaining();

 private:
  std::istream& in_;
  std::string source_;
};

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
std::string format_optional(std::optional<double> v);

// Parses a CSV field; empty means Undefined.
std::optional<double> parse_optional_double(std::string_view field);
double parse_double(std::string_view field);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(std::span<const std::string> parts, std::string_view sep);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// FNV-1a over raw bytes.
std::uint64_t fnv1a(std::span<const std::byte> data, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t hash_doubles(std::span<const double> v);
std::uint64_t hash_strings(std::span<const std::string> v);
std::string hex64(std::uint64_t v);

}  // namespace monolab
