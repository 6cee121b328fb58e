#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace spai {

/// Writes to `<path>.tmp` then renames over `path`.
void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer,
                      bool binary = false);

// Little-endian binary helpers.
namespace binary {

void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
void write_f64s(std::ostream& out, std::span<const double> values);
void write_magic(std::ostream& out, const char (&magic)[5]);

std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
std::vector<double> read_f64s(std::istream& in, std::size_t count);
void expect_magic(std::istream& in, const char (&magic)[5]);

} // namespace binary

/// Raw f64 vector file: u64 length, then values.
void write_vector_file(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_vector_file(const std::filesystem::path& path);

} // namespace spai
