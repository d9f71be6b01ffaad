#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace sharedb {

/// Invalid schema, workload, or configuration values.
struct ConfigError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (snapshots, state files).
struct DataError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Tuner/executor contract violation detected at run time.
struct ExecutionError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Internal invariant broken; always a bug.
struct InvariantError : std::logic_error
{
    using std::logic_error::logic_error;
};

#define SHAREDB_CHECK(cond, msg)                                                                   \
    do {                                                                                           \
        if (!(cond)) throw ::sharedb::InvariantError(std::string(msg) + " [" #cond "]");          \
    } while (0)

/// Dense table index: 0 is the fact table, 1..n are the dimensions in declaration order.
using TableId = std::uint32_t;
inline constexpr TableId kFactTable = 0;

/// Bit i set <=> dimension i (0-based, i.e. table id i+1) participates.
using DimMask = std::uint32_t;
inline constexpr std::size_t kMaxDimensions = 32;

inline constexpr DimMask dim_bit(std::size_t dim) { return DimMask{1} << dim; }
inline int dim_count(DimMask m) { return std::popcount(m); }

/// A column in the star schema.
struct ColumnRef
{
    TableId table = kFactTable;
    std::uint32_t column = 0;

    friend constexpr bool operator==(ColumnRef, ColumnRef) = default;
    friend constexpr auto operator<=>(ColumnRef, ColumnRef) = default;
};

/// Half-open integer range [lo, hi). Predicates and zone-map bounds use 64-bit ends so that open
/// bounds (x > 8 is [9, +inf)) are representable.
struct Range
{
    std::int64_t lo = std::numeric_limits<std::int64_t>::min();
    std::int64_t hi = std::numeric_limits<std::int64_t>::max();

    constexpr bool contains(std::int64_t v) const { return lo <= v && v < hi; }
    constexpr bool empty() const { return lo >= hi; }

    friend constexpr bool operator==(Range, Range) = default;
};

/// Single-attribute range predicate.
struct Predicate
{
    ColumnRef column;
    Range range;

    friend constexpr bool operator==(const Predicate &, const Predicate &) = default;
};

/// splitmix64 finaliser; used to derive independent seeds.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Unbiased value in [0, bound) from a 64-bit generator (Lemire's method). Independent of the
/// standard library's distribution implementations, so generated data is portable bit-for-bit.
template<typename Gen>
std::uint64_t bounded(Gen &gen, std::uint64_t bound)
{
    if (bound == 0) return 0;
    std::uint64_t x = gen();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            x = gen();
            m = static_cast<__uint128_t>(x) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

/// Uniform double in [0, 1).
template<typename Gen>
double unit_double(Gen &gen)
{
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

} // namespace sharedb
