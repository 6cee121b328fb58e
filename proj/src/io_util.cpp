#include "spai/io_util.hpp"

#include "spai/error.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace spai {

void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer,
                      bool binary) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        writer(out);
        out.flush();
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

namespace binary {

namespace {

template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

template <typename T>
void put(std::ostream& out, T v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ParseError("unexpected end of binary stream");
    return to_little(v);
}

} // namespace

void write_u32(std::ostream& out, std::uint32_t v) { put(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { put(out, v); }
void write_f64(std::ostream& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

void write_f64s(std::ostream& out, std::span<const double> values) {
    for (double v : values) write_f64(out, v);
}

void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

std::uint32_t read_u32(std::istream& in) { return get<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return get<std::uint64_t>(in); }
double read_f64(std::istream& in) { return std::bit_cast<double>(get<std::uint64_t>(in)); }

std::vector<double> read_f64s(std::istream& in, std::size_t count) {
    std::vector<double> v(count);
    for (double& x : v) x = read_f64(in);
    return v;
}

void expect_magic(std::istream& in, const char (&magic)[5]) {
    char buf[4] = {};
    in.read(buf, 4);
    if (!in || std::memcmp(buf, magic, 4) != 0)
        throw ParseError(std::string("bad magic, expected ") + magic);
}

} // namespace binary

void write_vector_file(const std::filesystem::path& path, std::span<const double> values) {
    write_atomically(
        path,
        [&](std::ostream& out) {
            binary::write_u64(out, values.size());
            binary::write_f64s(out, values);
        },
        true);
}

std::vector<double> read_vector_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    const auto n = binary::read_u64(in);
    return binary::read_f64s(in, n);
}

} // namespace spai
