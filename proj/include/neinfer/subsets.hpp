#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace neinfer {

using SubsetCount = std::uint64_t;

/// C(n, k). Throws OverflowError if the result does not fit in 64 bits.
SubsetCount binomial(std::size_t n, std::size_t k);

/// sum_{i=1..k_max} C(n, i). Requires 1 <= k_max <= n.
SubsetCount count_subsets(std::size_t n, std::size_t k_max);

/// Members of one subset of realisations: strictly increasing, non-empty.
class SubsetId {
public:
    SubsetId() = default;
    explicit SubsetId(std::vector<std::uint32_t> members);

    std::span<const std::uint32_t> members() const noexcept { return members_; }
    std::size_t size() const noexcept { return members_.size(); }

    /// Size first, then lexicographic: the enumeration order.
    friend std::strong_ordering operator<=>(const SubsetId& a, const SubsetId& b);
    friend bool operator==(const SubsetId& a, const SubsetId& b) = default;

private:
    std::vector<std::uint32_t> members_;
};

/// Position in the enumeration: subset size plus lexicographic rank among
/// subsets of that size.
struct SubsetCursor {
    std::size_t size = 1;
    SubsetCount rank = 0;
};

/// Global stream position <-> cursor.
SubsetCursor cursor_at(std::size_t n, std::size_t k_max, SubsetCount index);
SubsetCount stream_index(std::size_t n, std::size_t k_max, const SubsetCursor& cursor);

/// k-subset of {0..n-1} with the given lexicographic rank.
std::vector<std::uint32_t> unrank_combination(std::size_t n, std::size_t k, SubsetCount rank);

/// Streams all subsets of {0..n-1} with 1..k_max members, size-ascending
/// then lexicographic, over the global index range [begin, end).
///
///     SubsetEnumerator e(n, k_max);
///     while (e.next()) use(e.current());
class SubsetEnumerator {
public:
    SubsetEnumerator(std::size_t n, std::size_t k_max);
    SubsetEnumerator(std::size_t n, std::size_t k_max, SubsetCount begin, SubsetCount end);

    bool next();
    std::span<const std::uint32_t> current() const noexcept { return current_; }

    /// First member position that differs from the previous subset
    /// (0 after a size change or on the first subset).
    std::size_t changed_from() const noexcept { return changed_from_; }

    /// Global index of the current subset.
    SubsetCount index() const noexcept { return index_; }

private:
    std::size_t n_;
    std::size_t k_max_;
    SubsetCount begin_;
    SubsetCount end_;
    SubsetCount index_ = 0;
    bool started_ = false;
    std::vector<std::uint32_t> current_;
    std::size_t changed_from_ = 0;
};

/// Splits [0, total) into `parts` contiguous ranges of near-equal length.
std::vector<std::pair<SubsetCount, SubsetCount>> partition_range(SubsetCount total,
                                                                 std::size_t parts);

}  // namespace neinfer
