#include "gacfas/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gacfas {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64_le(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

}  // namespace

void write_params_bin(const std::filesystem::path& path, ConstSpan theta) {
  std::string out;
  out.reserve(8 * (theta.size() + 1));
  put_u64_le(out, theta.size());
  for (double v : theta) put_u64_le(out, std::bit_cast<std::uint64_t>(v));
  write_file_atomic(path, out);
}

Vec64 read_params_bin(const std::filesystem::path& path) {
  const std::string in = read_file(path);
  if (in.size() < 8) throw IoError(path.string() + ": truncated params header");
  const std::uint64_t n = get_u64_le(in, 0);
  if (in.size() != 8 * (n + 1)) {
    throw IoError(path.string() + ": expected " + std::to_string(n) + " values, file has " +
                  std::to_string(in.size()) + " bytes");
  }
  Vec64 theta(n);
  for (std::size_t i = 0; i < n; ++i) {
    theta[i] = std::bit_cast<double>(get_u64_le(in, 8 * (i + 1)));
  }
  return theta;
}

}  // namespace gacfas
