#pragma once

#include "satd_atlas/linkage.hpp"
#include "satd_atlas/statistics.hpp"

#include <array>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace satd::propagation {

using linkage::LinkageGraph;
using linkage::NodeIndex;

inline constexpr std::size_t kMaxChainLength = 4;

/// Position in the canonical order Issue, PullRequest, Commit, Comment.
/// Sections take their parent's position.
constexpr int level_of(ArtifactKind k) {
    switch (main_kind(k)) {
    case ArtifactKind::Issue: return 0;
    case ArtifactKind::PullRequest: return 1;
    case ArtifactKind::Commit: return 2;
    case ArtifactKind::Comment: return 3;
    default: return -1;
    }
}

constexpr ArtifactKind kind_at_level(int level) {
    constexpr ArtifactKind order[] = {ArtifactKind::Issue, ArtifactKind::PullRequest, ArtifactKind::Commit,
                                      ArtifactKind::Comment};
    return order[level];
}

/// A chain oriented issue-end first; `nodes[k]` sits at level `first_level + k`.
using ChainVisitor = std::function<void(const std::vector<NodeIndex>&)>;

struct ChainCounts {
    std::array<std::uint64_t, kMaxChainLength + 1> by_length{};  // index = length
    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto c : by_length) t += c;
        return t;
    }
};

namespace detail {

inline void extend(const LinkageGraph& g, std::vector<NodeIndex>& path, std::size_t max_len, ChainCounts& counts,
                   const ChainVisitor& visit) {
    ++counts.by_length[path.size()];
    if (visit) visit(path);
    if (path.size() == max_len) return;
    const int next = level_of(g.node(path.back()).kind) + 1;
    if (next > 3) return;
    // both the main kind and its section kind sit on the next level
    for (auto k : {kind_at_level(next), ArtifactKind::PRSection, ArtifactKind::IssueSection}) {
        if (level_of(k) != next) continue;
        for (auto n : g.adjacent(path.back(), k)) {
            path.push_back(n);
            extend(g, path, max_len, counts, visit);
            path.pop_back();
        }
    }
}

} // namespace detail

/// Counts every simple path whose kinds follow the canonical order, once
/// per node set, walking from the issue end toward the comment end.
/// Kind levels strictly increase along a walk, so paths are simple and a
/// node set determines its path.
inline ChainCounts enumerate_chains(const LinkageGraph& g, std::size_t max_len = kMaxChainLength,
                                    const ChainVisitor& visit = nullptr) {
    if (max_len == 0 || max_len > kMaxChainLength)
        throw Error(ErrorCode::Config, "max chain length must be in 1.." + std::to_string(kMaxChainLength));
    ChainCounts counts;
    std::vector<NodeIndex> path;
    for (NodeIndex i = 0; i < g.node_count(); ++i) {
        if (level_of(g.node(i).kind) < 0) continue;
        path.assign(1, i);
        detail::extend(g, path, max_len, counts, visit);
    }
    return counts;
}

// ---------------------------------------------------------------------------
// SATD-only statistics

struct LengthRow {
    std::size_t length = 0;
    std::uint64_t unique_chains = 0;
    std::uint64_t satd_only = 0;
    double satd_only_pct = 0.0;
    std::optional<double> mean_priority;
    std::optional<double> median_priority;
};

struct ChainLengthStats {
    std::vector<LengthRow> rows;  // lengths 1..max_len
    std::vector<std::string> missing_labels;  // sorted node ids without a label
    std::uint64_t chains_with_missing_labels = 0;
};

using LabelMap = std::unordered_map<std::string, bool>;
using PriorityMap = std::unordered_map<std::string, double>;

/// Incremental aggregation of SATD-only chains. Priority statistics are
/// taken over every node of every SATD-only chain, so a node counts once
/// per chain it appears in.
class SatdChainAccumulator {
public:
    SatdChainAccumulator(const LinkageGraph& g, const LabelMap& labels, const PriorityMap& priorities,
                         std::size_t max_len)
        : g_(g), max_len_(max_len), weights_(max_len + 1) {
        label_.resize(g.node_count());
        priority_.resize(g.node_count());
        for (NodeIndex i = 0; i < g.node_count(); ++i) {
            const auto& id = g.node(i).id;
            if (auto it = labels.find(id); it != labels.end()) label_[i] = it->second;
            if (auto it = priorities.find(id); it != priorities.end()) priority_[i] = it->second;
        }
        unique_.fill(0);
        satd_.fill(0);
    }

    /// Returns whether the chain is SATD-only.
    bool add(const std::vector<NodeIndex>& chain) {
        ++unique_[chain.size()];
        bool all = true, missing = false;
        for (auto n : chain) {
            if (!label_[n]) {
                missing = true;
                missing_.push_back(n);
            } else if (!*label_[n]) {
                all = false;
            }
        }
        if (missing) {
            ++with_missing_;
            return false;
        }
        if (!all) return false;
        ++satd_[chain.size()];
        auto& w = weights_[chain.size()];
        for (auto n : chain)
            if (priority_[n]) ++w[n];
        return true;
    }

    ChainLengthStats finish() const {
        ChainLengthStats s;
        for (std::size_t len = 1; len <= max_len_; ++len) {
            LengthRow r;
            r.length = len;
            r.unique_chains = unique_[len];
            r.satd_only = satd_[len];
            r.satd_only_pct = r.unique_chains ? 100.0 * static_cast<double>(r.satd_only) /
                                                    static_cast<double>(r.unique_chains)
                                              : 0.0;
            std::vector<std::pair<double, std::uint64_t>> items;
            double sum = 0.0;
            std::uint64_t total = 0;
            for (const auto& [n, w] : weights_[len]) {
                items.emplace_back(*priority_[n], w);
                sum += *priority_[n] * static_cast<double>(w);
                total += w;
            }
            if (total > 0) {
                r.mean_priority = sum / static_cast<double>(total);
                r.median_priority = stats::weighted_median(items);
            }
            s.rows.push_back(r);
        }
        std::vector<std::string> ids;
        for (auto n : missing_) ids.push_back(g_.node(n).id);
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        s.missing_labels = std::move(ids);
        s.chains_with_missing_labels = with_missing_;
        return s;
    }

private:
    const LinkageGraph& g_;
    std::size_t max_len_;
    std::vector<std::optional<bool>> label_;
    std::vector<std::optional<double>> priority_;
    std::array<std::uint64_t, kMaxChainLength + 1> unique_{}, satd_{};
    std::vector<std::map<NodeIndex, std::uint64_t>> weights_;
    std::vector<NodeIndex> missing_;
    std::uint64_t with_missing_ = 0;
};

/// Statistics over a given set of chains.
inline ChainLengthStats satd_only_stats(const LinkageGraph& g, const std::vector<std::vector<NodeIndex>>& chains,
                                        const LabelMap& labels, const PriorityMap& priorities,
                                        std::size_t max_len = kMaxChainLength) {
    SatdChainAccumulator acc(g, labels, priorities, max_len);
    for (const auto& c : chains) {
        if (c.empty() || c.size() > max_len) throw Error(ErrorCode::Config, "chain length out of range");
        acc.add(c);
    }
    return acc.finish();
}

/// Enumerates and aggregates in one pass; `dump` sees every chain with its
/// SATD-only flag.
inline ChainLengthStats chain_statistics(
    const LinkageGraph& g, const LabelMap& labels, const PriorityMap& priorities,
    std::size_t max_len = kMaxChainLength,
    const std::function<void(const std::vector<NodeIndex>&, bool)>& dump = nullptr) {
    SatdChainAccumulator acc(g, labels, priorities, max_len);
    enumerate_chains(g, max_len, [&](const std::vector<NodeIndex>& c) {
        const bool satd = acc.add(c);
        if (dump) dump(c, satd);
    });
    return acc.finish();
}

// ---------------------------------------------------------------------------
// Directional depth

struct DepthTable {
    ArtifactKind origin = ArtifactKind::Comment;
    std::array<std::uint64_t, kMaxChainLength> counts{};  // counts[d-1] for depth d

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
    double percentage(std::size_t depth) const {
        const auto t = total();
        return t ? 100.0 * static_cast<double>(counts[depth - 1]) / static_cast<double>(t) : 0.0;
    }

    static DepthTable from_counts(ArtifactKind origin, const std::array<std::uint64_t, kMaxChainLength>& counts) {
        DepthTable t;
        t.origin = origin;
        t.counts = counts;
        return t;
    }
};

/// Kinds visited from `origin` at depths 1..4.
inline std::array<ArtifactKind, kMaxChainLength> depth_path(ArtifactKind origin) {
    if (origin == ArtifactKind::Comment)
        return {ArtifactKind::Comment, ArtifactKind::Commit, ArtifactKind::PullRequest, ArtifactKind::Issue};
    return {ArtifactKind::Issue, ArtifactKind::PullRequest, ArtifactKind::Commit, ArtifactKind::Comment};
}

/// For each SATD artifact of the origin kind, the length of the longest
/// SATD-only path heading toward the opposite end of the canonical order.
/// Sections are folded into their parents: a PR or issue is SATD when it
/// or any of its sections is.
inline DepthTable directional_depth(const LinkageGraph& g, const LabelMap& labels, ArtifactKind origin) {
    if (origin != ArtifactKind::Comment && origin != ArtifactKind::Issue)
        throw Error(ErrorCode::Config, "depth origin must be Comment or Issue");
    const auto n = g.node_count();
    auto group = [&](NodeIndex i) -> NodeIndex {
        if (is_section(g.node(i).kind))
            if (auto p = g.parent(i)) return *p;
        return i;
    };
    std::vector<char> satd(n, 0);
    for (NodeIndex i = 0; i < n; ++i) {
        auto it = labels.find(g.node(i).id);
        if (it != labels.end() && it->second) satd[group(i)] = 1;
    }
    const int step = origin == ArtifactKind::Comment ? -1 : 1;

    std::vector<int> depth(n, 0);  // 0 = not computed
    std::function<int(NodeIndex)> longest = [&](NodeIndex v) -> int {
        if (depth[v]) return depth[v];
        int best = 0;
        const int next = level_of(g.node(v).kind) + step;
        if (next >= 0 && next <= 3) {
            auto consider = [&](NodeIndex u) {
                u = group(u);
                if (satd[u] && level_of(g.node(u).kind) == next) best = std::max(best, longest(u));
            };
            // the group's own edges plus those of its sections
            std::vector<NodeIndex> members{v};
            for (auto s : g.sections(v)) members.push_back(s);
            for (auto m : members)
                for (auto u : g.adjacent(m)) consider(u);
        }
        return depth[v] = 1 + best;
    };

    DepthTable t;
    t.origin = origin;
    for (NodeIndex i = 0; i < n; ++i) {
        if (g.node(i).kind != origin || !satd[i]) continue;
        const int d = longest(i);
        ++t.counts[static_cast<std::size_t>(std::min<int>(d, kMaxChainLength)) - 1];
    }
    return t;
}

// ---------------------------------------------------------------------------
// Output

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string chain_lengths_csv(const ChainLengthStats& s) {
    std::string out = "length,unique_chains,satd_only,satd_only_pct,mean_priority,median_priority\n";
    for (const auto& r : s.rows) {
        out += std::to_string(r.length) + "," + std::to_string(r.unique_chains) + "," + std::to_string(r.satd_only) +
               "," + fixed(r.satd_only_pct, 4) + "," + (r.mean_priority ? fixed(*r.mean_priority, 6) : "") + "," +
               (r.median_priority ? fixed(*r.median_priority, 6) : "") + "\n";
    }
    return out;
}

inline std::string depth_csv(const DepthTable& t) {
    const auto path = depth_path(t.origin);
    std::string out = "depth,path,count,percentage\n";
    for (std::size_t d = 1; d <= kMaxChainLength; ++d) {
        std::string label;
        for (std::size_t k = 0; k < d; ++k) label += (k ? ">" : "") + std::string(to_string(path[k]));
        out += std::to_string(d) + "," + label + "," + std::to_string(t.counts[d - 1]) + "," +
               fixed(t.percentage(d), 2) + "\n";
    }
    out += "total,," + std::to_string(t.total()) + "," + (t.total() ? "100.00" : "0.00") + "\n";
    return out;
}

inline Json chain_to_json(const LinkageGraph& g, const std::vector<NodeIndex>& chain, bool satd_only,
                          const PriorityMap& priorities) {
    Json ids = Json::array(), kinds = Json::array();
    double sum = 0.0;
    std::size_t with = 0;
    for (auto n : chain) {
        ids.push_back(g.node(n).id);
        kinds.push_back(std::string(to_string(g.node(n).kind)));
        if (auto it = priorities.find(g.node(n).id); it != priorities.end()) {
            sum += it->second;
            ++with;
        }
    }
    Json j{{"nodes", ids}, {"kinds", kinds}, {"length", chain.size()}, {"satd_only", satd_only}};
    j["mean_priority"] = satd_only && with ? Json(sum / static_cast<double>(with)) : Json(nullptr);
    return j;
}

} // namespace satd::propagation
