#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sharedb {

inline constexpr std::size_t kDefaultQuerySetWidth = 512;

inline constexpr std::size_t words_for(std::size_t bits) { return std::max<std::size_t>(1, (bits + 63) / 64); }

/** Fixed-width bit vector; bit i means "serves query i".  The width is chosen per batch. */
class QuerySet
{
    std::vector<std::uint64_t> words_;

    public:
    QuerySet() : words_(1, 0) { }
    explicit QuerySet(std::size_t width) : words_(words_for(width), 0) { }

    static QuerySet all(std::size_t n, std::size_t width) {
        QuerySet s(width);
        for (std::size_t i = 0; i < n; ++i) s.set(i);
        return s;
    }

    std::size_t num_words() const { return words_.size(); }
    std::span<std::uint64_t> words() { return words_; }
    std::span<const std::uint64_t> words() const { return words_; }

    void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
    void reset(std::size_t i) { words_[i / 64] &= ~(std::uint64_t{1} << (i % 64)); }
    bool test(std::size_t i) const { return i / 64 < words_.size() && (words_[i / 64] >> (i % 64)) & 1; }

    bool none() const { return std::all_of(words_.begin(), words_.end(), [](auto w) { return w == 0; }); }
    bool any() const { return !none(); }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto w : words_) n += std::popcount(w);
        return n;
    }

    QuerySet &operator|=(const QuerySet &o) {
        for (std::size_t i = 0; i < words_.size() && i < o.words_.size(); ++i) words_[i] |= o.words_[i];
        return *this;
    }
    QuerySet &operator&=(const QuerySet &o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= i < o.words_.size() ? o.words_[i] : 0;
        return *this;
    }
    friend QuerySet operator|(QuerySet a, const QuerySet &b) { return a |= b; }
    friend QuerySet operator&(QuerySet a, const QuerySet &b) { return a &= b; }
    QuerySet minus(const QuerySet &o) const {
        QuerySet r = *this;
        for (std::size_t i = 0; i < r.words_.size() && i < o.words_.size(); ++i) r.words_[i] &= ~o.words_[i];
        return r;
    }
    bool is_subset_of(const QuerySet &o) const { return minus(o).none(); }

    friend bool operator==(const QuerySet &, const QuerySet &) = default;

    template<typename F>
    void for_each(F &&f) const {
        for (std::size_t w = 0; w < words_.size(); ++w)
            for (auto bits = words_[w]; bits; bits &= bits - 1)
                f(w * 64 + std::countr_zero(bits));
    }

    std::vector<std::size_t> to_vector() const {
        std::vector<std::size_t> out;
        for_each([&](std::size_t i) { out.push_back(i); });
        return out;
    }

    /** Most-significant word first, fixed-width lowercase hex. */
    std::string to_hex() const {
        static constexpr char digits[] = "0123456789abcdef";
        std::string s;
        for (auto it = words_.rbegin(); it != words_.rend(); ++it)
            for (int shift = 60; shift >= 0; shift -= 4) s.push_back(digits[(*it >> shift) & 0xf]);
        return s;
    }
};

} // namespace sharedb
