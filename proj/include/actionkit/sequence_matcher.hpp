#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

namespace actionkit {

struct MatchingBlock {
    std::size_t a;  // start in the first sequence
    std::size_t b;  // start in the second sequence
    std::size_t size;

    friend bool operator==(const MatchingBlock&, const MatchingBlock&) = default;
};

/// Ratcliff/Obershelp matcher with the tie-breaking of Python's
/// difflib.SequenceMatcher (autojunk disabled, no junk elements): the longest
/// common block is found, then both flanks are matched recursively. Among
/// equally long blocks the one starting earliest in `a` wins, then earliest
/// in `b`.
template <typename T>
class SequenceMatcher {
public:
    SequenceMatcher(std::span<const T> a, std::span<const T> b) : a_(a), b_(b) {
        for (std::size_t j = 0; j < b_.size(); ++j) b2j_[b_[j]].push_back(j);
    }

    /// Longest matching block inside a[alo, ahi) x b[blo, bhi).
    MatchingBlock find_longest_match(std::size_t alo, std::size_t ahi, std::size_t blo,
                                     std::size_t bhi) {
        MatchingBlock best{alo, blo, 0};
        // run_[j + 1] = length of the match ending at a[i - 1], b[j]
        prev_.assign(b_.size() + 1, 0);
        cur_.assign(b_.size() + 1, 0);
        std::vector<std::size_t> touched_prev, touched_cur;
        for (std::size_t i = alo; i < ahi; ++i) {
            auto found = b2j_.find(a_[i]);
            if (found != b2j_.end()) {
                for (std::size_t j : found->second) {
                    if (j < blo) continue;
                    if (j >= bhi) break;
                    std::size_t k = prev_[j] + 1;
                    cur_[j + 1] = k;
                    touched_cur.push_back(j + 1);
                    if (k > best.size) best = {i + 1 - k, j + 1 - k, k};
                }
            }
            for (std::size_t t : touched_prev) prev_[t] = 0;
            std::swap(prev_, cur_);
            std::swap(touched_prev, touched_cur);
            touched_cur.clear();
        }
        return best;
    }

    /// Non-overlapping matching blocks in increasing order (no sentinel).
    std::vector<MatchingBlock> matching_blocks() {
        std::vector<MatchingBlock> blocks;
        struct Range {
            std::size_t alo, ahi, blo, bhi;
        };
        std::vector<Range> stack{{0, a_.size(), 0, b_.size()}};
        while (!stack.empty()) {
            Range r = stack.back();
            stack.pop_back();
            MatchingBlock m = find_longest_match(r.alo, r.ahi, r.blo, r.bhi);
            if (m.size == 0) continue;
            blocks.push_back(m);
            if (r.alo < m.a && r.blo < m.b) stack.push_back({r.alo, m.a, r.blo, m.b});
            if (m.a + m.size < r.ahi && m.b + m.size < r.bhi) {
                stack.push_back({m.a + m.size, r.ahi, m.b + m.size, r.bhi});
            }
        }
        std::sort(blocks.begin(), blocks.end(),
                  [](const MatchingBlock& x, const MatchingBlock& y) { return x.a < y.a; });
        return blocks;
    }

    std::size_t matched_length() {
        std::size_t total = 0;
        for (const auto& m : matching_blocks()) total += m.size;
        return total;
    }

    /// 2M / (|a| + |b|); 1.0 when both are empty.
    double ratio() {
        std::size_t denom = a_.size() + b_.size();
        if (denom == 0) return 1.0;
        return 2.0 * static_cast<double>(matched_length()) / static_cast<double>(denom);
    }

private:
    std::span<const T> a_;
    std::span<const T> b_;
    std::unordered_map<T, std::vector<std::size_t>> b2j_;
    std::vector<std::size_t> prev_;
    std::vector<std::size_t> cur_;
};

template <typename T>
double gestalt_ratio(std::span<const T> a, std::span<const T> b) {
    return SequenceMatcher<T>(a, b).ratio();
}

}  // namespace actionkit
