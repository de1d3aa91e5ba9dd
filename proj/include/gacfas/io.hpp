#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "gacfas/numerics.hpp"

namespace gacfas {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// %.17g: enough digits to round-trip any double.
std::string format_double(double v);

/// Writes to `<path>.tmp` and renames over `path`. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view bytes);

/// params.bin: uint64 count, then `count` IEEE-754 doubles, all little-endian.
void write_params_bin(const std::filesystem::path& path, ConstSpan theta);
Vec64 read_params_bin(const std::filesystem::path& path);

}  // namespace gacfas
