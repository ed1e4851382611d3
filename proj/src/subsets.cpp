#include "neinfer/subsets.hpp"

#include <limits>
#include <numeric>
#include <string>

#include "neinfer/error.hpp"

namespace neinfer {

SubsetCount binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        // r * (n - k + i) / i stays an integer at every step.
        r = r * (n - k + i) / i;
        if (r > std::numeric_limits<SubsetCount>::max()) {
            throw OverflowError("binomial(" + std::to_string(n) + ", " + std::to_string(k) +
                                ") exceeds 64 bits");
        }
    }
    return static_cast<SubsetCount>(r);
}

SubsetCount count_subsets(std::size_t n, std::size_t k_max) {
    if (k_max < 1 || k_max > n) {
        throw InvalidArgument("count_subsets: need 1 <= k_max <= n (n=" + std::to_string(n) +
                              ", k_max=" + std::to_string(k_max) + ")");
    }
    SubsetCount total = 0;
    for (std::size_t i = 1; i <= k_max; ++i) {
        const SubsetCount c = binomial(n, i);
        if (total > std::numeric_limits<SubsetCount>::max() - c) {
            throw OverflowError("count_subsets: total exceeds 64 bits");
        }
        total += c;
    }
    return total;
}

SubsetId::SubsetId(std::vector<std::uint32_t> members) : members_(std::move(members)) {
    if (members_.empty()) throw InvalidArgument("subset: must have at least one member");
    for (std::size_t i = 1; i < members_.size(); ++i) {
        if (members_[i] <= members_[i - 1]) {
            throw InvalidArgument("subset: members must be strictly increasing");
        }
    }
}

std::strong_ordering operator<=>(const SubsetId& a, const SubsetId& b) {
    if (auto c = a.size() <=> b.size(); c != 0) return c;
    return std::lexicographical_compare_three_way(a.members_.begin(), a.members_.end(),
                                                  b.members_.begin(), b.members_.end());
}

SubsetCursor cursor_at(std::size_t n, std::size_t k_max, SubsetCount index) {
    SubsetCount remaining = index;
    for (std::size_t k = 1; k <= k_max; ++k) {
        const SubsetCount c = binomial(n, k);
        if (remaining < c) return {k, remaining};
        remaining -= c;
    }
    if (remaining > 0) throw InvalidArgument("cursor_at: index beyond the end of the stream");
    return {k_max + 1, 0};  // one past the end
}

SubsetCount stream_index(std::size_t n, std::size_t /*k_max*/, const SubsetCursor& cursor) {
    SubsetCount index = cursor.rank;
    for (std::size_t k = 1; k < cursor.size; ++k) index += binomial(n, k);
    return index;
}

std::vector<std::uint32_t> unrank_combination(std::size_t n, std::size_t k, SubsetCount rank) {
    if (k == 0 || k > n || rank >= binomial(n, k)) {
        throw InvalidArgument("unrank_combination: rank out of range");
    }
    std::vector<std::uint32_t> out;
    out.reserve(k);
    std::size_t x = 0;
    for (std::size_t pos = 0; pos < k; ++pos) {
        for (;; ++x) {
            // Number of combinations whose member at `pos` is x.
            const SubsetCount with_x = binomial(n - x - 1, k - pos - 1);
            if (rank < with_x) break;
            rank -= with_x;
        }
        out.push_back(static_cast<std::uint32_t>(x));
        ++x;
    }
    return out;
}

SubsetEnumerator::SubsetEnumerator(std::size_t n, std::size_t k_max)
    : SubsetEnumerator(n, k_max, 0, count_subsets(n, k_max)) {}

SubsetEnumerator::SubsetEnumerator(std::size_t n, std::size_t k_max, SubsetCount begin,
                                   SubsetCount end)
    : n_(n), k_max_(k_max), begin_(begin), end_(end) {
    const SubsetCount total = count_subsets(n, k_max);
    if (begin > end || end > total) throw InvalidArgument("subset enumerator: bad range");
    if (n > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("subset enumerator: ensemble too large");
    }
}

bool SubsetEnumerator::next() {
    if (!started_) {
        started_ = true;
        index_ = begin_;
        if (index_ >= end_) return false;
        const SubsetCursor c = cursor_at(n_, k_max_, index_);
        current_ = unrank_combination(n_, c.size, c.rank);
        changed_from_ = 0;
        return true;
    }
    if (index_ + 1 >= end_) {
        index_ = end_;
        return false;
    }
    ++index_;
    const std::size_t k = current_.size();
    // Rightmost position that can still be incremented.
    std::size_t i = k;
    while (i > 0 && current_[i - 1] == n_ - k + (i - 1)) --i;
    if (i == 0) {
        current_.resize(k + 1);
        std::iota(current_.begin(), current_.end(), 0u);
        changed_from_ = 0;
        return true;
    }
    --i;
    ++current_[i];
    for (std::size_t j = i + 1; j < k; ++j) current_[j] = current_[j - 1] + 1;
    changed_from_ = i;
    return true;
}

std::vector<std::pair<SubsetCount, SubsetCount>> partition_range(SubsetCount total,
                                                                 std::size_t parts) {
    if (parts == 0) parts = 1;
    std::vector<std::pair<SubsetCount, SubsetCount>> out;
    out.reserve(parts);
    const SubsetCount base = total / parts;
    const SubsetCount extra = total % parts;
    SubsetCount at = 0;
    for (std::size_t p = 0; p < parts; ++p) {
        const SubsetCount len = base + (p < extra ? 1 : 0);
        out.emplace_back(at, at + len);
        at += len;
    }
    return out;
}

}  // namespace neinfer
