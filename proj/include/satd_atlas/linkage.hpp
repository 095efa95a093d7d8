#pragma once

#include "satd_atlas/comment_lifecycle.hpp"
#include "satd_atlas/core_model.hpp"
#include "satd_atlas/forge_model.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace satd::linkage {

// ---------------------------------------------------------------------------
// Reference grammar

namespace detail {

inline bool is_word(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Digits at `pos`, terminated by a non-word character or end of text.
inline std::optional<std::uint64_t> number_at(std::string_view text, std::size_t pos) {
    std::size_t end = pos;
    while (end < text.size() && text[end] >= '0' && text[end] <= '9') ++end;
    if (end == pos || end - pos > 18) return std::nullopt;
    if (end < text.size() && is_word(text[end])) return std::nullopt;
    std::uint64_t n = 0;
    for (std::size_t i = pos; i < end; ++i) n = n * 10 + static_cast<std::uint64_t>(text[i] - '0');
    if (n == 0) return std::nullopt;
    return n;
}

} // namespace detail

/// Issue numbers referenced as `#N` or `GH-N`, in order of first appearance.
/// Closing phrases ("fixes #N") are covered by the `#N` rule. References
/// qualified with another repository (`owner/name#N`) are ignored.
inline std::vector<std::uint64_t> extract_issue_refs(std::string_view text) {
    std::vector<std::uint64_t> out;
    std::unordered_set<std::uint64_t> seen;
    auto add = [&](std::uint64_t n) {
        if (seen.insert(n).second) out.push_back(n);
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '#') {
            if (i > 0) {
                const char p = text[i - 1];
                if (detail::is_word(p) || p == '/' || p == '-' || p == '.' || p == '&') continue;
            }
            if (auto n = detail::number_at(text, i + 1)) add(*n);
        } else if ((text[i] == 'G' || text[i] == 'g') && i + 3 < text.size() && (text[i + 1] == 'H' || text[i + 1] == 'h') &&
                   text[i + 2] == '-') {
            if (i > 0 && (detail::is_word(text[i - 1]) || text[i - 1] == '/')) continue;
            if (auto n = detail::number_at(text, i + 3)) add(*n);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Edges

enum class LinkKind { CommentCommit, CommitPR, PRIssue, SectionInherited };

enum class Evidence : std::uint8_t {
    IntroducingSHA,
    ModifyingSHA,
    RemovingSHA,
    MergeSHA,
    CommitInclusion,
    TextReference,
    ReverseTextReference,
    ForgeMetadata,
    Inheritance,
};

inline constexpr Evidence kAllEvidence[] = {Evidence::IntroducingSHA,  Evidence::ModifyingSHA,
                                            Evidence::RemovingSHA,     Evidence::MergeSHA,
                                            Evidence::CommitInclusion, Evidence::TextReference,
                                            Evidence::ReverseTextReference, Evidence::ForgeMetadata,
                                            Evidence::Inheritance};

constexpr std::string_view to_string(LinkKind k) {
    switch (k) {
    case LinkKind::CommentCommit: return "CommentCommit";
    case LinkKind::CommitPR: return "CommitPR";
    case LinkKind::PRIssue: return "PRIssue";
    case LinkKind::SectionInherited: return "SectionInherited";
    }
    return "?";
}

constexpr std::string_view to_string(Evidence e) {
    switch (e) {
    case Evidence::IntroducingSHA: return "IntroducingSHA";
    case Evidence::ModifyingSHA: return "ModifyingSHA";
    case Evidence::RemovingSHA: return "RemovingSHA";
    case Evidence::MergeSHA: return "MergeSHA";
    case Evidence::CommitInclusion: return "CommitInclusion";
    case Evidence::TextReference: return "TextReference";
    case Evidence::ReverseTextReference: return "ReverseTextReference";
    case Evidence::ForgeMetadata: return "ForgeMetadata";
    case Evidence::Inheritance: return "Inheritance";
    }
    return "?";
}

inline Evidence parse_evidence(std::string_view s) {
    for (auto e : kAllEvidence)
        if (to_string(e) == s) return e;
    throw Error(ErrorCode::SchemaMismatch, "unknown evidence '" + std::string(s) + "'");
}

using EvidenceSet = std::uint16_t;

constexpr EvidenceSet bit(Evidence e) { return static_cast<EvidenceSet>(1u << static_cast<unsigned>(e)); }

/// Main-level link kind joining two artifact kinds (sections count as
/// their parent kind), or nullopt when the pair never links.
constexpr std::optional<LinkKind> base_kind_for(ArtifactKind a, ArtifactKind b) {
    const auto x = main_kind(a), y = main_kind(b);
    auto is = [&](ArtifactKind p, ArtifactKind q) { return (x == p && y == q) || (x == q && y == p); };
    if (is(ArtifactKind::Comment, ArtifactKind::Commit)) return LinkKind::CommentCommit;
    if (is(ArtifactKind::Commit, ArtifactKind::PullRequest)) return LinkKind::CommitPR;
    if (is(ArtifactKind::PullRequest, ArtifactKind::Issue)) return LinkKind::PRIssue;
    return std::nullopt;
}

struct LinkEdge {
    std::string a_id;  // a_id < b_id
    std::string b_id;
    LinkKind kind = LinkKind::CommentCommit;
    std::optional<LinkKind> inherited_from;  // set iff kind == SectionInherited
    EvidenceSet evidence = 0;

    std::string kind_label() const {
        if (kind == LinkKind::SectionInherited && inherited_from)
            return "SectionInherited(" + std::string(to_string(*inherited_from)) + ")";
        return std::string(to_string(kind));
    }
    std::vector<Evidence> evidence_list() const {
        std::vector<Evidence> out;
        for (auto e : kAllEvidence)
            if (evidence & bit(e)) out.push_back(e);
        return out;
    }
    friend bool operator==(const LinkEdge&, const LinkEdge&) = default;
};

struct DanglingReference {
    std::string source_id;
    std::string target_id;
    Evidence evidence;
    friend bool operator==(const DanglingReference&, const DanglingReference&) = default;
};

struct NodeInfo {
    std::string id;
    ArtifactKind kind = ArtifactKind::Comment;
    std::optional<std::string> parent_id;
};

// ---------------------------------------------------------------------------
// Graph

using NodeIndex = std::uint32_t;

/// Immutable per-repository link graph over interned artifact ids.
class LinkageGraph {
public:
    const RepoRef& repo() const { return repo_; }
    std::size_t node_count() const { return nodes_.size(); }
    const NodeInfo& node(NodeIndex i) const { return nodes_[i]; }
    const std::vector<LinkEdge>& edges() const { return edges_; }
    const std::vector<DanglingReference>& dangling() const { return dangling_; }

    std::optional<NodeIndex> find(std::string_view id) const {
        auto it = index_.find(std::string(id));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    NodeIndex index_of(std::string_view id) const {
        auto i = find(id);
        if (!i) throw Error(ErrorCode::UnknownNode, "unknown node '" + std::string(id) + "'");
        return *i;
    }

    /// Neighbors of `i` with the given kind, sorted by index.
    const std::vector<NodeIndex>& adjacent(NodeIndex i, ArtifactKind kind) const {
        return adjacency_[i][static_cast<std::size_t>(kind)];
    }

    std::vector<NodeIndex> adjacent(NodeIndex i) const {
        std::vector<NodeIndex> out;
        for (const auto& bucket : adjacency_[i]) out.insert(out.end(), bucket.begin(), bucket.end());
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Section nodes whose parent is `i`, sorted by index.
    const std::vector<NodeIndex>& sections(NodeIndex i) const { return sections_[i]; }
    std::optional<NodeIndex> parent(NodeIndex i) const { return parents_[i]; }

    std::vector<std::string> neighbors(std::string_view id, std::optional<ArtifactKind> kind = std::nullopt) const {
        const auto i = index_of(id);
        std::vector<std::string> out;
        if (kind) {
            for (auto n : adjacent(i, *kind)) out.push_back(nodes_[n].id);
        } else {
            for (auto n : adjacent(i)) out.push_back(nodes_[n].id);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    friend class GraphBuilder;
    RepoRef repo_;
    std::vector<NodeInfo> nodes_;
    std::unordered_map<std::string, NodeIndex> index_;
    std::vector<LinkEdge> edges_;
    std::vector<std::array<std::vector<NodeIndex>, 6>> adjacency_;
    std::vector<std::vector<NodeIndex>> sections_;
    std::vector<std::optional<NodeIndex>> parents_;
    std::vector<DanglingReference> dangling_;
};

class GraphBuilder {
public:
    explicit GraphBuilder(RepoRef repo) { g_.repo_ = std::move(repo); }

    /// Starts from an existing graph's nodes, edges, and dangling records.
    explicit GraphBuilder(const LinkageGraph& g) : g_(g) {
        for (std::size_t k = 0; k < g_.edges_.size(); ++k) {
            const auto a = g_.index_.at(g_.edges_[k].a_id), b = g_.index_.at(g_.edges_[k].b_id);
            edge_index_.emplace(key(a, b), k);
        }
    }

    void add_node(const std::string& id, ArtifactKind kind, std::optional<std::string> parent_id = std::nullopt) {
        if (g_.index_.count(id)) return;
        g_.index_.emplace(id, static_cast<NodeIndex>(g_.nodes_.size()));
        g_.nodes_.push_back({id, kind, std::move(parent_id)});
    }

    void add_node(const Artifact& a) { add_node(a.id, a.kind, a.parent_id); }

    bool has_node(const std::string& id) const { return g_.index_.count(id) > 0; }

    /// Adds or merges an edge. Missing endpoints are recorded as dangling
    /// and skipped; pairs that cannot link by kind are rejected.
    bool add_edge(const std::string& source, const std::string& target, Evidence evidence) {
        auto si = g_.index_.find(source), ti = g_.index_.find(target);
        if (si == g_.index_.end() || ti == g_.index_.end()) {
            g_.dangling_.push_back({source, target, evidence});
            return false;
        }
        if (si->second == ti->second) return false;
        const auto ka = g_.nodes_[si->second].kind, kb = g_.nodes_[ti->second].kind;
        auto base = base_kind_for(ka, kb);
        if (!base)
            throw Error(ErrorCode::SchemaMismatch, "no link kind joins " + std::string(to_string(ka)) + " and " +
                                                       std::string(to_string(kb)));
        const bool inherited = is_section(ka) || is_section(kb);
        if (is_section(ka) && is_section(kb))
            throw Error(ErrorCode::SchemaMismatch, "section-to-section links are not modelled");

        const auto k = key(si->second, ti->second);
        if (auto it = edge_index_.find(k); it != edge_index_.end()) {
            g_.edges_[it->second].evidence |= bit(evidence);
            return true;
        }
        LinkEdge e;
        e.a_id = std::min(source, target);
        e.b_id = std::max(source, target);
        e.kind = inherited ? LinkKind::SectionInherited : *base;
        if (inherited) e.inherited_from = *base;
        e.evidence = bit(evidence);
        edge_index_.emplace(k, g_.edges_.size());
        g_.edges_.push_back(std::move(e));
        return true;
    }

    LinkageGraph finish() && {
        auto& g = g_;
        std::sort(g.edges_.begin(), g.edges_.end(),
                  [](const LinkEdge& x, const LinkEdge& y) { return std::tie(x.a_id, x.b_id) < std::tie(y.a_id, y.b_id); });
        const auto n = g.nodes_.size();
        g.adjacency_.assign(n, {});
        g.sections_.assign(n, {});
        g.parents_.assign(n, std::nullopt);
        for (const auto& e : g.edges_) {
            const auto a = g.index_.at(e.a_id), b = g.index_.at(e.b_id);
            g.adjacency_[a][static_cast<std::size_t>(g.nodes_[b].kind)].push_back(b);
            g.adjacency_[b][static_cast<std::size_t>(g.nodes_[a].kind)].push_back(a);
        }
        for (auto& per_kind : g.adjacency_)
            for (auto& v : per_kind) std::sort(v.begin(), v.end());
        for (NodeIndex i = 0; i < n; ++i) {
            const auto& p = g.nodes_[i].parent_id;
            if (!p) continue;
            if (auto it = g.index_.find(*p); it != g.index_.end()) {
                g.parents_[i] = it->second;
                g.sections_[it->second].push_back(i);
            }
        }
        return std::move(g);
    }

private:
    static std::uint64_t key(NodeIndex a, NodeIndex b) {
        if (a > b) std::swap(a, b);
        return (static_cast<std::uint64_t>(a) << 32) | b;
    }

    LinkageGraph g_;
    std::unordered_map<std::uint64_t, std::size_t> edge_index_;
};

// ---------------------------------------------------------------------------
// Construction

struct LinkOptions {
    /// Also link issues to PRs they mention in their own title/body.
    bool reverse_issue_refs = false;
};

struct LinkInputs {
    RepoRef repo;
    /// Every artifact of the repository: comments, commits, PRs, issues, sections.
    std::vector<Artifact> artifacts;
    std::vector<lifecycle::CommentLifecycle> lifecycles;
    std::vector<PullRequestRecord> pull_requests;
    std::vector<IssueRecord> issues;
};

/// Main-level graph: comment/commit via lifecycle SHAs, commit/PR via merge
/// SHA and included commits, PR/issue via text references and metadata.
inline LinkageGraph build_graph(const LinkInputs& in, const LinkOptions& opts = {}) {
    GraphBuilder b(in.repo);
    for (const auto& a : in.artifacts) {
        if (!(a.repo == in.repo))
            throw Error(ErrorCode::SchemaMismatch, a.id + " belongs to " + a.repo.identifier() + ", not " +
                                                       in.repo.identifier());
        b.add_node(a);
    }

    for (const auto& lc : in.lifecycles) {
        b.add_edge(lc.comment_id, commit_id(in.repo, lc.introduced_sha), Evidence::IntroducingSHA);
        if (lc.removed_sha) {
            if (lc.successor_id) {
                b.add_edge(lc.comment_id, commit_id(in.repo, *lc.removed_sha), Evidence::ModifyingSHA);
                b.add_edge(*lc.successor_id, commit_id(in.repo, *lc.removed_sha), Evidence::ModifyingSHA);
            } else {
                b.add_edge(lc.comment_id, commit_id(in.repo, *lc.removed_sha), Evidence::RemovingSHA);
            }
        }
    }

    for (const auto& pr : in.pull_requests) {
        const auto& pid = pr.artifact.id;
        if (pr.merge_sha) b.add_edge(pid, commit_id(in.repo, *pr.merge_sha), Evidence::MergeSHA);
        for (const auto& sha : pr.commit_shas) b.add_edge(pid, commit_id(in.repo, sha), Evidence::CommitInclusion);
        for (auto n : extract_issue_refs(join_title_body(pr.title, pr.body)))
            b.add_edge(pid, issue_id(in.repo, n), Evidence::TextReference);
        for (auto n : pr.linked_issues) b.add_edge(pid, issue_id(in.repo, n), Evidence::ForgeMetadata);
    }

    if (opts.reverse_issue_refs) {
        for (const auto& is : in.issues)
            for (auto n : extract_issue_refs(join_title_body(is.title, is.body))) {
                const auto target = pull_request_id(in.repo, n);
                // "#N" in an issue may name another issue; only PR targets link here.
                if (b.has_node(target)) b.add_edge(is.artifact.id, target, Evidence::ReverseTextReference);
            }
    }
    return std::move(b).finish();
}

/// Copies every edge incident to a PR or issue onto each of its sections.
inline LinkageGraph inherit_section_links(const LinkageGraph& g) {
    GraphBuilder b(g);
    for (const auto& e : g.edges()) {
        if (e.kind == LinkKind::SectionInherited) continue;
        const auto a = g.index_of(e.a_id), c = g.index_of(e.b_id);
        for (auto [main, far] : {std::pair{a, c}, std::pair{c, a}}) {
            const auto k = g.node(main).kind;
            if (k != ArtifactKind::PullRequest && k != ArtifactKind::Issue) continue;
            for (auto s : g.sections(main)) b.add_edge(g.node(s).id, g.node(far).id, Evidence::Inheritance);
        }
    }
    return std::move(b).finish();
}

// ---------------------------------------------------------------------------
// Output

inline Json to_json(const LinkEdge& e) {
    Json ev = Json::array();
    for (auto x : e.evidence_list()) ev.push_back(std::string(to_string(x)));
    return Json{{"a_id", e.a_id}, {"b_id", e.b_id}, {"kind", e.kind_label()}, {"evidence", ev}};
}

inline LinkEdge link_edge_from_json(const Json& j) {
    LinkEdge e;
    e.a_id = j.at("a_id").get<std::string>();
    e.b_id = j.at("b_id").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    constexpr std::string_view inh = "SectionInherited(";
    if (kind.rfind(inh, 0) == 0 && kind.back() == ')') {
        e.kind = LinkKind::SectionInherited;
        const auto base = kind.substr(inh.size(), kind.size() - inh.size() - 1);
        for (auto k : {LinkKind::CommentCommit, LinkKind::CommitPR, LinkKind::PRIssue})
            if (to_string(k) == base) e.inherited_from = k;
        if (!e.inherited_from) throw Error(ErrorCode::SchemaMismatch, "bad link kind '" + kind + "'");
    } else {
        bool found = false;
        for (auto k : {LinkKind::CommentCommit, LinkKind::CommitPR, LinkKind::PRIssue})
            if (to_string(k) == kind) {
                e.kind = k;
                found = true;
            }
        if (!found) throw Error(ErrorCode::SchemaMismatch, "bad link kind '" + kind + "'");
    }
    for (const auto& x : j.at("evidence")) e.evidence |= bit(parse_evidence(x.get<std::string>()));
    return e;
}

inline Json summary_json(const LinkageGraph& g) {
    std::map<std::string, std::size_t> nodes, edges;
    for (NodeIndex i = 0; i < g.node_count(); ++i) ++nodes[std::string(to_string(g.node(i).kind))];
    for (const auto& e : g.edges()) ++edges[e.kind_label()];
    std::map<std::string, std::size_t> dangling;
    for (const auto& d : g.dangling()) ++dangling[std::string(to_string(d.evidence))];
    return Json{{"repo", g.repo().identifier()},
                {"node_count", g.node_count()},
                {"edge_count", g.edges().size()},
                {"nodes_by_kind", nodes},
                {"edges_by_kind", edges},
                {"dangling_references", g.dangling().size()},
                {"dangling_by_evidence", dangling}};
}

inline void write_links(const std::filesystem::path& path, const LinkageGraph& g) {
    write_jsonl(path, g.edges(), [](const LinkEdge& e) { return to_json(e); });
}

inline Json to_json(const DanglingReference& d) {
    return Json{{"source_id", d.source_id}, {"target_id", d.target_id}, {"evidence", std::string(to_string(d.evidence))}};
}

/// Rebuilds a graph from its node artifacts and a links file.
inline LinkageGraph graph_from_edges(const RepoRef& repo, const std::vector<NodeInfo>& nodes,
                                     const std::vector<LinkEdge>& edges) {
    GraphBuilder b(repo);
    for (const auto& n : nodes) b.add_node(n.id, n.kind, n.parent_id);
    for (const auto& e : edges)
        for (auto ev : e.evidence_list()) b.add_edge(e.a_id, e.b_id, ev);
    return std::move(b).finish();
}

} // namespace satd::linkage
