#pragma once

#include <sharedb/common.hpp>

#include <istream>
#include <ostream>
#include <span>
#include <type_traits>
#include <vector>

namespace sharedb::detail {

template<typename T>
void put_le(std::ostream &out, T v)
{
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((u >> (8 * i)) & 0xff);
    out.write(buf, sizeof(T));
}

template<typename T>
T get_le(std::istream &in)
{
    using U = std::make_unsigned_t<T>;
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char *>(buf), sizeof(T))) throw DataError("snapshot truncated");
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(buf[i]) << (8 * i);
    return static_cast<T>(u);
}

inline void put_column(std::ostream &out, std::span<const std::int32_t> c)
{
    std::vector<char> buf(c.size() * 4);
    for (std::size_t i = 0; i < c.size(); ++i) {
        auto u = static_cast<std::uint32_t>(c[i]);
        for (int k = 0; k < 4; ++k) buf[4 * i + k] = static_cast<char>((u >> (8 * k)) & 0xff);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline std::vector<std::int32_t> get_column(std::istream &in, std::uint64_t rows)
{
    std::vector<unsigned char> buf(rows * 4);
    if (!in.read(reinterpret_cast<char *>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw DataError("snapshot truncated");
    std::vector<std::int32_t> c(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        std::uint32_t u = 0;
        for (int k = 0; k < 4; ++k) u |= std::uint32_t{buf[4 * i + k]} << (8 * k);
        c[i] = static_cast<std::int32_t>(u);
    }
    return c;
}

} // namespace sharedb::detail
