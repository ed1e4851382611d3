#include <doctest.h>

#include <algorithm>

#include "neinfer/error.hpp"
#include "neinfer/subsets.hpp"

using namespace neinfer;

namespace {

std::vector<std::vector<std::uint32_t>> stream(std::size_t n, std::size_t k, SubsetCount b, SubsetCount e) {
    std::vector<std::vector<std::uint32_t>> out;
    SubsetEnumerator en(n, k, b, e);
    while (en.next()) out.emplace_back(en.current().begin(), en.current().end());
    return out;
}

// Independent oracle: all subsets by bitmask, sorted by size then lexicographically.
std::vector<std::vector<std::uint32_t>> brute(std::size_t n, std::size_t k) {
    std::vector<std::vector<std::uint32_t>> out;
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        std::vector<std::uint32_t> s;
        for (std::uint32_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) s.push_back(i);
        }
        if (s.size() <= k) out.push_back(s);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    return out;
}

}  // namespace

TEST_SUITE("subsets") {

TEST_CASE("subset counts of the preset ensembles") {
    CHECK(count_subsets(50, 3) == 20875);
    CHECK(count_subsets(100, 4) == 4087975);
    CHECK(count_subsets(100, 3) == 166750);
    CHECK(count_subsets(10, 10) == 1023);
    CHECK_THROWS_AS(count_subsets(5, 0), InvalidArgument);
    CHECK_THROWS_AS(count_subsets(5, 6), InvalidArgument);
    CHECK_THROWS_AS(count_subsets(200, 100), OverflowError);
    CHECK(binomial(64, 32) == 1832624140942590534ULL);
    CHECK(count_subsets(64, 64) == ~0ULL);
    CHECK_THROWS_AS(count_subsets(65, 65), OverflowError);
}

TEST_CASE("enumeration order") {
    const auto s = stream(3, 2, 0, count_subsets(3, 2));
    const std::vector<std::vector<std::uint32_t>> expect{{0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}};
    CHECK(s == expect);
}

TEST_CASE("stream matches the brute-force oracle and the count") {
    for (std::size_t n = 1; n <= 12; ++n) {
        for (std::size_t k = 1; k <= n; ++k) {
            const auto all = stream(n, k, 0, count_subsets(n, k));
            CHECK(all == brute(n, k));
        }
    }
    for (std::size_t n : {20, 25}) {
        for (std::size_t k : {1, 2, 3, 5}) {
            SubsetEnumerator e(n, k);
            SubsetCount len = 0;
            while (e.next()) ++len;
            CHECK(len == count_subsets(n, k));
        }
    }
}

TEST_CASE("cursor partitions concatenate to the full stream") {
    const std::size_t n = 11, k = 4;
    const SubsetCount total = count_subsets(n, k);
    const auto full = stream(n, k, 0, total);
    for (std::size_t parts : {1, 2, 4, 7, 64}) {
        std::vector<std::vector<std::uint32_t>> joined;
        for (const auto& [b, e] : partition_range(total, parts)) {
            const auto piece = stream(n, k, b, e);
            joined.insert(joined.end(), piece.begin(), piece.end());
        }
        CHECK(joined == full);
    }
}

TEST_CASE("unranking and cursors") {
    const auto combos = brute(9, 3);
    SubsetCount idx = 0;
    for (const auto& c : combos) {
        const SubsetCursor cur = cursor_at(9, 3, idx);
        CHECK(cur.size == c.size());
        CHECK(unrank_combination(9, cur.size, cur.rank) == c);
        CHECK(stream_index(9, 3, cur) == idx);
        ++idx;
    }
    const SubsetCursor end = cursor_at(9, 3, count_subsets(9, 3));
    CHECK(end.size == 4);
    CHECK(end.rank == 0);
    CHECK_THROWS_AS(cursor_at(9, 3, count_subsets(9, 3) + 1), InvalidArgument);
}

TEST_CASE("changed_from tracks the first differing member") {
    SubsetEnumerator e(5, 3);
    std::vector<std::uint32_t> prev;
    bool first = true;
    while (e.next()) {
        const auto cur = e.current();
        if (!first && cur.size() == prev.size()) {
            std::size_t d = 0;
            while (d < cur.size() && cur[d] == prev[d]) ++d;
            CHECK(e.changed_from() == d);
        } else {
            CHECK(e.changed_from() == 0);
        }
        prev.assign(cur.begin(), cur.end());
        first = false;
    }
}

TEST_CASE("SubsetId validation and ordering") {
    CHECK_THROWS_AS(SubsetId(std::vector<std::uint32_t>{}), InvalidArgument);
    CHECK_THROWS_AS(SubsetId({2, 1}), InvalidArgument);
    CHECK_THROWS_AS(SubsetId({1, 1}), InvalidArgument);
    CHECK(SubsetId({5}) < SubsetId({0, 1}));
    CHECK(SubsetId({0, 2}) < SubsetId({1, 2}));
}

}
