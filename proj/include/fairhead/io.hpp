#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace fairhead {

std::string read_file(const std::filesystem::path& path);

// Writes to a temp file in the target directory, then renames into place so
// readers never observe a half-written file.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

std::uint64_t fnv1a64(std::span<const std::byte> bytes);
std::uint64_t fnv1a64(std::string_view text);

std::string to_hex(std::uint64_t value);

// Decimal form with 17 significant digits; round-trips a double exactly.
std::string format_g17(double value);

// Worker cap: FAIRHEAD_THREADS when set (clamped to >= 1), else the hardware
// concurrency, else 1.
std::size_t thread_cap();

}  // namespace fairhead
