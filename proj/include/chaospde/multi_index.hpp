#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chaospde/common.hpp"

namespace chaospde {

// Sparse multi-index over (basis index k, noise index l) pairs with positive
// integer exponents. Entries are kept sorted by (k, l).
class MultiIndex {
public:
    struct Entry {
        int k;
        int l;
        int count;
        bool operator==(const Entry&) const = default;
    };

    MultiIndex() = default;

    static MultiIndex unit(int k, int l) {
        MultiIndex a;
        a.entries_.push_back({k, l, 1});
        return a;
    }

    const std::vector<Entry>& entries() const { return entries_; }
    bool is_zero() const { return entries_.empty(); }

    int at(int k, int l) const {
        for (const auto& e : entries_)
            if (e.k == k && e.l == l) return e.count;
        return 0;
    }

    // |alpha|: total degree.
    int length() const {
        int s = 0;
        for (const auto& e : entries_) s += e.count;
        return s;
    }

    // Highest basis index in the support (0 for the zero index).
    int order() const {
        int m = 0;
        for (const auto& e : entries_) m = std::max(m, e.k);
        return m;
    }

    // Highest noise index in the support (0 for the zero index).
    int dimension() const {
        int m = 0;
        for (const auto& e : entries_) m = std::max(m, e.l);
        return m;
    }

    // alpha! in exact integer arithmetic. Valid for length() <= 20.
    std::uint64_t factorial() const {
        if (length() > 20) throw std::domain_error("MultiIndex::factorial: length above exact-arithmetic cap (20)");
        std::uint64_t f = 1;
        for (const auto& e : entries_)
            for (int c = 2; c <= e.count; ++c) f *= static_cast<std::uint64_t>(c);
        return f;
    }

    MultiIndex plus(int k, int l, int add = 1) const {
        MultiIndex out = *this;
        for (auto& e : out.entries_) {
            if (e.k == k && e.l == l) {
                e.count += add;
                return out;
            }
        }
        auto pos = std::lower_bound(out.entries_.begin(), out.entries_.end(), std::make_pair(k, l),
                                    [](const Entry& e, const std::pair<int, int>& kl) {
                                        return e.k != kl.first ? e.k < kl.first : e.l < kl.second;
                                    });
        out.entries_.insert(pos, {k, l, add});
        return out;
    }

    MultiIndex plus(const MultiIndex& other) const {
        MultiIndex out = *this;
        for (const auto& e : other.entries_) out = out.plus(e.k, e.l, e.count);
        return out;
    }

    // alpha - eps_{k,l}; requires alpha_{k,l} >= 1.
    MultiIndex minus_unit(int k, int l) const {
        MultiIndex out;
        bool found = false;
        for (const auto& e : entries_) {
            if (e.k == k && e.l == l) {
                found = true;
                if (e.count > 1) out.entries_.push_back({e.k, e.l, e.count - 1});
            } else {
                out.entries_.push_back(e);
            }
        }
        if (!found) throw std::domain_error("MultiIndex::minus_unit: entry not present");
        return out;
    }

    // Sorted (k, l) pairs with repetition, alpha_{k,l} copies each.
    std::vector<std::pair<int, int>> characteristic_set() const {
        std::vector<std::pair<int, int>> out;
        out.reserve(static_cast<std::size_t>(length()));
        for (const auto& e : entries_)
            for (int c = 0; c < e.count; ++c) out.emplace_back(e.k, e.l);
        return out;
    }

    bool operator==(const MultiIndex& other) const { return entries_ == other.entries_; }

    std::string to_string() const {
        if (entries_.empty()) return "(0)";
        std::string s;
        for (const auto& e : entries_) {
            if (!s.empty()) s += "+";
            if (e.count != 1) s += std::to_string(e.count) + "*";
            s += "e(" + std::to_string(e.k) + "," + std::to_string(e.l) + ")";
        }
        return s;
    }

    std::size_t hash() const {
        std::uint64_t h = 1469598103934665603ULL;
        auto mixin = [&h](std::uint64_t v) {
            h ^= v;
            h *= 1099511628211ULL;
        };
        for (const auto& e : entries_) {
            mixin(static_cast<std::uint64_t>(e.k));
            mixin(static_cast<std::uint64_t>(e.l));
            mixin(static_cast<std::uint64_t>(e.count));
        }
        return static_cast<std::size_t>(h);
    }

private:
    std::vector<Entry> entries_;
};

struct MultiIndexHash {
    std::size_t operator()(const MultiIndex& a) const { return a.hash(); }
};

// Finite truncation J with |alpha| <= max_length, order <= max_order,
// dimension <= max_dimension, enumerated in a deterministic graded order.
struct TruncationSet {
    int max_length = 0;     // N
    int max_order = 1;      // n
    int max_dimension = 1;  // r
    std::vector<MultiIndex> members;

    bool contains_characteristics(int len, int ord, int dim) const {
        return len <= max_length && ord <= max_order && dim <= max_dimension;
    }
};

// Exact cardinality: sum_{j<=N} C(n*r + j - 1, j).
inline std::uint64_t truncation_cardinality(int N, int n, int r, bool& overflow) {
    overflow = false;
    std::uint64_t slots = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(r);
    std::uint64_t total = 0;
    for (int j = 0; j <= N; ++j) {
        std::uint64_t c = binomial_checked(slots + static_cast<std::uint64_t>(j) - 1, static_cast<std::uint64_t>(j), overflow);
        if (overflow || total > UINT64_MAX - c) {
            overflow = true;
            return UINT64_MAX;
        }
        total += c;
    }
    return total;
}

namespace detail {

// Emits compositions of `degree` over slots[from..] in lexicographic order of
// the exponent vector, larger leading exponent first. Only slots that receive
// a positive exponent are visited.
inline void enumerate_degree(int degree, std::size_t from, const std::vector<std::pair<int, int>>& slots,
                             const MultiIndex& prefix, std::vector<MultiIndex>& out) {
    if (degree == 0) {
        out.push_back(prefix);
        return;
    }
    for (std::size_t s = from; s < slots.size(); ++s) {
        std::size_t remaining_slots = slots.size() - s - 1;
        for (int c = degree; c >= 1; --c) {
            if (c < degree && remaining_slots == 0) break;
            MultiIndex next = prefix.plus(slots[s].first, slots[s].second, c);
            enumerate_degree(degree - c, s + 1, slots, next, out);
        }
    }
}

}  // namespace detail

// All multi-indices over the n x r grid with total degree <= N, grouped by
// increasing degree; within a degree, lexicographic on the exponent vector in
// (k, l) slot order with the larger leading exponent first.
inline TruncationSet enumerate_truncation(int N, int n, int r, std::uint64_t member_limit = 1000000) {
    if (N < 0 || n < 1 || r < 1) throw std::invalid_argument("enumerate_truncation: need N >= 0, n >= 1, r >= 1");
    bool overflow = false;
    std::uint64_t card = truncation_cardinality(N, n, r, overflow);
    if (overflow || card > member_limit)
        throw GuardError("enumerate_truncation: truncation set would exceed the member limit (" +
                         std::to_string(member_limit) + ")");
    std::vector<std::pair<int, int>> slots;
    slots.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(r));
    for (int k = 1; k <= n; ++k)
        for (int l = 1; l <= r; ++l) slots.emplace_back(k, l);

    TruncationSet set;
    set.max_length = N;
    set.max_order = n;
    set.max_dimension = r;
    set.members.reserve(static_cast<std::size_t>(card));
    for (int degree = 0; degree <= N; ++degree) {
        MultiIndex prefix;
        detail::enumerate_degree(degree, 0, slots, prefix, set.members);
    }
    return set;
}

}  // namespace chaospde
