#include "linkage_fixture.hpp"

#include <gtest/gtest.h>

#include <set>
#include <tuple>

using namespace satd;
using namespace satd::linkage;
using namespace satd::testing;

namespace {

using EdgeKey = std::tuple<std::string, std::string, std::string, std::set<std::string>>;

std::set<EdgeKey> edge_set(const LinkageGraph& g) {
    std::set<EdgeKey> out;
    for (const auto& e : g.edges()) {
        std::set<std::string> ev;
        for (auto x : e.evidence_list()) ev.insert(std::string(to_string(x)));
        out.emplace(e.a_id, e.b_id, e.kind_label(), ev);
    }
    return out;
}

// Rule-by-rule constructor over every node pair; no interning, no merging.
std::set<EdgeKey> naive_edges(const LinkInputs& in, bool inherit) {
    std::map<std::string, const Artifact*> nodes;
    for (const auto& a : in.artifacts) nodes.emplace(a.id, &a);
    std::map<std::pair<std::string, std::string>, std::set<std::string>> main_edges;
    auto kind_name = [](ArtifactKind x, ArtifactKind y) -> std::string {
        auto has = [&](ArtifactKind k) { return x == k || y == k; };
        if (has(ArtifactKind::Comment)) return "CommentCommit";
        if (has(ArtifactKind::Issue)) return "PRIssue";
        return "CommitPR";
    };
    for (const auto& [xid, x] : nodes)
        for (const auto& [yid, y] : nodes) {
            if (!(xid < yid)) continue;
            std::set<std::string> ev;
            for (int flip = 0; flip < 2; ++flip) {
                const Artifact* p = flip ? y : x;
                const Artifact* q = flip ? x : y;
                if (p->kind == ArtifactKind::Comment && q->kind == ArtifactKind::Commit) {
                    const auto sha = *q->commit_sha;
                    for (const auto& lc : in.lifecycles) {
                        if (lc.comment_id == p->id) {
                            if (lc.introduced_sha == sha) ev.insert("IntroducingSHA");
                            if (lc.removed_sha == sha) ev.insert(lc.successor_id ? "ModifyingSHA" : "RemovingSHA");
                        }
                        if (lc.successor_id == p->id && lc.removed_sha == sha) ev.insert("ModifyingSHA");
                    }
                }
                if (p->kind == ArtifactKind::PullRequest && q->kind == ArtifactKind::Commit) {
                    const auto sha = *q->commit_sha;
                    for (const auto& pr : in.pull_requests) {
                        if (pr.artifact.id != p->id) continue;
                        if (pr.merge_sha == sha) ev.insert("MergeSHA");
                        for (const auto& s : pr.commit_shas)
                            if (s == sha) ev.insert("CommitInclusion");
                    }
                }
                if (p->kind == ArtifactKind::PullRequest && q->kind == ArtifactKind::Issue) {
                    for (const auto& pr : in.pull_requests) {
                        if (pr.artifact.id != p->id) continue;
                        for (const auto& is : in.issues) {
                            if (is.artifact.id != q->id) continue;
                            for (auto n : extract_issue_refs(pr.title + "\n\n" + pr.body))
                                if (n == is.number) ev.insert("TextReference");
                            for (auto n : pr.linked_issues)
                                if (n == is.number) ev.insert("ForgeMetadata");
                        }
                    }
                }
            }
            if (!ev.empty()) main_edges[{xid, yid}] = ev;
        }
    std::set<EdgeKey> out;
    for (const auto& [k, ev] : main_edges)
        out.emplace(k.first, k.second, kind_name(nodes[k.first]->kind, nodes[k.second]->kind), ev);
    if (!inherit) return out;
    for (const auto& [sid, s] : nodes) {
        if (!s->parent_id || !nodes.count(*s->parent_id)) continue;
        for (const auto& [k, ev] : main_edges) {
            std::string far;
            if (k.first == *s->parent_id) far = k.second;
            else if (k.second == *s->parent_id) far = k.first;
            else continue;
            const auto base = kind_name(nodes[k.first]->kind, nodes[k.second]->kind);
            out.emplace(std::min(sid, far), std::max(sid, far), "SectionInherited(" + base + ")",
                        std::set<std::string>{"Inheritance"});
        }
    }
    return out;
}

struct Fixture {
    LinkInputs in;
    std::string s1, s2, comment, pr10, issue3;
};

Fixture small_fixture() {
    Fixture f;
    f.in.repo = fixture_repo();
    const auto& repo = f.in.repo;
    f.s1 = fake_sha(1);
    f.s2 = fake_sha(2);
    f.in.artifacts.push_back(commit_artifact(repo, f.s1, "add solver"));
    f.in.artifacts.push_back(commit_artifact(repo, f.s2, "merge"));
    f.comment = comment_id(repo, "src/a.c", 3, f.s1, "todo");
    f.in.artifacts.push_back(comment_artifact(repo, f.comment, f.s1, "TODO"));
    f.in.lifecycles.push_back(lifecycle_for(repo, f.comment, f.s1));

    PullRequestRecord pr;
    pr.number = 10;
    pr.title = "Solver";
    pr.body = "fixes #3";
    pr.commit_shas = {f.s1};
    pr.artifact = make_artifact(pull_request_id(repo, 10), repo, ArtifactKind::PullRequest, "Solver\n\nfixes #3",
                                from_unix(0), "dev");
    f.pr10 = pr.artifact.id;
    f.in.artifacts.push_back(pr.artifact);
    for (auto& s : sections_for(repo, ArtifactKind::PullRequest, 10, f.pr10, 1)) f.in.artifacts.push_back(s);
    f.in.pull_requests.push_back(pr);

    IssueRecord is;
    is.number = 3;
    is.title = "Wrong result";
    is.artifact = make_artifact(issue_id(repo, 3), repo, ArtifactKind::Issue, "Wrong result", from_unix(0), "dev");
    f.issue3 = is.artifact.id;
    f.in.artifacts.push_back(is.artifact);
    for (auto& s : sections_for(repo, ArtifactKind::Issue, 3, f.issue3, 0)) f.in.artifacts.push_back(s);
    f.in.issues.push_back(is);
    return f;
}

} // namespace

TEST(IssueRefs, Grammar) {
    EXPECT_EQ(extract_issue_refs("Fixes #123 and closes #45"), (std::vector<std::uint64_t>{123, 45}));
    EXPECT_EQ(extract_issue_refs("see issue #12, also #12 again"), (std::vector<std::uint64_t>{12}));
    EXPECT_TRUE(extract_issue_refs("other/repo#7").empty());
    EXPECT_EQ(extract_issue_refs("Resolved GH-9; gh-10 too"), (std::vector<std::uint64_t>{9, 10}));
    EXPECT_TRUE(extract_issue_refs("abc#5 x#6 &#123; #12abc #0").empty());
    EXPECT_EQ(extract_issue_refs("(#8)"), (std::vector<std::uint64_t>{8}));
    EXPECT_EQ(extract_issue_refs("fixed #4\nclosed #2"), (std::vector<std::uint64_t>{4, 2}));
}

TEST(BuildGraph, ThreeRuleFixture) {
    auto f = small_fixture();
    auto g = build_graph(f.in);
    EXPECT_EQ(g.neighbors(f.comment), std::vector<std::string>{commit_id(f.in.repo, f.s1)});
    EXPECT_EQ(g.neighbors(commit_id(f.in.repo, f.s1), ArtifactKind::PullRequest), std::vector<std::string>{f.pr10});
    EXPECT_EQ(g.neighbors(f.pr10, ArtifactKind::Issue), std::vector<std::string>{f.issue3});
    EXPECT_EQ(g.edges().size(), 3u);
    EXPECT_TRUE(g.neighbors(commit_id(f.in.repo, f.s2)).empty());
    EXPECT_THROW(g.neighbors("nope"), Error);
}

TEST(BuildGraph, MergeShaOnly) {
    auto f = small_fixture();
    f.in.pull_requests[0].commit_shas.clear();
    f.in.pull_requests[0].merge_sha = f.s2;
    auto g = build_graph(f.in);
    std::size_t commit_pr = 0;
    for (const auto& e : g.edges())
        if (e.kind == LinkKind::CommitPR) ++commit_pr;
    EXPECT_EQ(commit_pr, 1u);
}

TEST(BuildGraph, DuplicateEvidenceCollapses) {
    auto f = small_fixture();
    f.in.pull_requests[0].merge_sha = f.s1;
    f.in.pull_requests[0].linked_issues = {3};
    auto g = build_graph(f.in);
    EXPECT_EQ(g.edges().size(), 3u);
    for (const auto& e : g.edges()) {
        if (e.kind == LinkKind::CommitPR || e.kind == LinkKind::PRIssue) {
            EXPECT_EQ(e.evidence_list().size(), 2u);
        }
    }
}

TEST(BuildGraph, DanglingReferencesRecorded) {
    auto f = small_fixture();
    f.in.pull_requests[0].commit_shas.push_back(fake_sha(99));
    f.in.pull_requests[0].body += " and #77";
    auto g = build_graph(f.in);
    ASSERT_EQ(g.dangling().size(), 2u);
    EXPECT_EQ(g.dangling()[0].target_id, commit_id(f.in.repo, fake_sha(99)));
    EXPECT_EQ(g.dangling()[1].target_id, issue_id(f.in.repo, 77));
    EXPECT_EQ(g.edges().size(), 3u);
}

TEST(BuildGraph, ModifiedCommentLinksBothIdentities) {
    auto f = small_fixture();
    const auto next = comment_id(f.in.repo, "src/a.c", 3, f.s2, "todo later");
    f.in.artifacts.push_back(comment_artifact(f.in.repo, next, f.s2, "TODO later"));
    f.in.lifecycles[0] = lifecycle_for(f.in.repo, f.comment, f.s1, f.s2, next);
    f.in.lifecycles.push_back(lifecycle_for(f.in.repo, next, f.s2));
    auto g = build_graph(f.in);
    EXPECT_EQ(g.neighbors(commit_id(f.in.repo, f.s2), ArtifactKind::Comment),
              (std::vector<std::string>{std::min(f.comment, next), std::max(f.comment, next)}));
}

TEST(BuildGraph, ReverseIssueReferencesAreOptIn) {
    auto f = small_fixture();
    f.in.pull_requests[0].body.clear();
    f.in.issues[0].body = "handled in #10";
    EXPECT_TRUE(build_graph(f.in).neighbors(f.issue3).empty());
    auto g = build_graph(f.in, {.reverse_issue_refs = true});
    ASSERT_EQ(g.neighbors(f.issue3), std::vector<std::string>{f.pr10});
    for (const auto& e : g.edges())
        if (e.kind == LinkKind::PRIssue) {
            EXPECT_EQ(e.evidence_list(), std::vector<Evidence>{Evidence::ReverseTextReference});
        }
}

TEST(BuildGraph, RejectsForeignArtifacts) {
    auto f = small_fixture();
    f.in.artifacts[0].repo.name = "other";
    EXPECT_THROW(build_graph(f.in), Error);
}

TEST(BuildGraph, MatchesNaiveConstructorOnRandomRepos) {
    std::mt19937 rng(42);
    for (int trial = 0; trial < 60; ++trial) {
        auto in = random_link_inputs(rng);
        ASSERT_LE(in.artifacts.size(), 200u);
        auto g = build_graph(in);
        EXPECT_EQ(edge_set(g), naive_edges(in, false)) << "trial " << trial;
        EXPECT_EQ(edge_set(inherit_section_links(g)), naive_edges(in, true)) << "trial " << trial;
    }
}

TEST(Inheritance, SectionsGainParentEdges) {
    auto f = small_fixture();
    // PR 10 with title, description and one discussion comment
    f.in.artifacts.erase(std::remove_if(f.in.artifacts.begin(), f.in.artifacts.end(),
                                        [](const Artifact& a) { return a.kind == ArtifactKind::PRSection; }),
                         f.in.artifacts.end());
    auto secs = sections_for(f.in.repo, ArtifactKind::PullRequest, 10, f.pr10, 1);
    for (auto& s : secs) f.in.artifacts.push_back(s);
    auto g = inherit_section_links(build_graph(f.in));
    std::size_t to_s1 = 0;
    for (const auto& e : g.edges())
        if (e.kind == LinkKind::SectionInherited && (e.a_id == commit_id(f.in.repo, f.s1) || e.b_id == commit_id(f.in.repo, f.s1)))
            ++to_s1;
    EXPECT_EQ(to_s1, 3u);
    // the issue's single Title section inherits the PR link
    auto title = section_id(f.in.repo, ArtifactKind::Issue, 3, SectionRole::title());
    EXPECT_EQ(g.neighbors(title), std::vector<std::string>{f.pr10});
    EXPECT_EQ(g.neighbors(f.pr10, ArtifactKind::Issue), std::vector<std::string>{f.issue3});
}

TEST(Inheritance, UnlinkedIssueSectionsStayIsolated) {
    auto f = small_fixture();
    f.in.pull_requests[0].body.clear();
    auto g = inherit_section_links(build_graph(f.in));
    EXPECT_TRUE(g.neighbors(section_id(f.in.repo, ArtifactKind::Issue, 3, SectionRole::title())).empty());
}

TEST(Inheritance, FixtureGoldenEdgeList) {
    auto f = small_fixture();
    auto g = inherit_section_links(build_graph(f.in));
    const auto& r = f.in.repo;
    const auto c1 = commit_id(r, f.s1);
    const auto pt = section_id(r, ArtifactKind::PullRequest, 10, SectionRole::title());
    const auto pd = section_id(r, ArtifactKind::PullRequest, 10, SectionRole::description());
    const auto pc = section_id(r, ArtifactKind::PullRequest, 10, SectionRole::discussion(0));
    const auto it = section_id(r, ArtifactKind::Issue, 3, SectionRole::title());
    const auto id = section_id(r, ArtifactKind::Issue, 3, SectionRole::description());
    std::set<std::tuple<std::string, std::string, std::string>> expected = {
        {f.comment, c1, "CommentCommit"},
        {c1, f.pr10, "CommitPR"},
        {f.issue3, f.pr10, "PRIssue"},
        {c1, pt, "SectionInherited(CommitPR)"},
        {c1, pd, "SectionInherited(CommitPR)"},
        {c1, pc, "SectionInherited(CommitPR)"},
        {f.issue3, pt, "SectionInherited(PRIssue)"},
        {f.issue3, pd, "SectionInherited(PRIssue)"},
        {f.issue3, pc, "SectionInherited(PRIssue)"},
        {f.pr10, it, "SectionInherited(PRIssue)"},
        {f.pr10, id, "SectionInherited(PRIssue)"},
    };
    std::set<std::tuple<std::string, std::string, std::string>> got;
    for (const auto& e : g.edges()) got.emplace(e.a_id, e.b_id, e.kind_label());
    std::set<std::tuple<std::string, std::string, std::string>> canon;
    for (auto [a, b, k] : expected) canon.emplace(std::min(a, b), std::max(a, b), k);
    EXPECT_EQ(got, canon);
}

TEST(Neighbors, SymmetricOnRandomGraphs) {
    std::mt19937 rng(7);
    std::size_t queries = 0;
    while (queries < 1000) {
        auto g = inherit_section_links(build_graph(random_link_inputs(rng)));
        if (g.node_count() == 0) continue;
        for (int q = 0; q < 50; ++q, ++queries) {
            auto a = g.node(std::uniform_int_distribution<NodeIndex>(0, g.node_count() - 1)(rng)).id;
            for (const auto& b : g.neighbors(a)) {
                auto back = g.neighbors(b);
                EXPECT_TRUE(std::binary_search(back.begin(), back.end(), a));
            }
        }
    }
}

TEST(Invariants, KindConsistencyAndCompleteness) {
    std::mt19937 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        auto g = inherit_section_links(build_graph(random_link_inputs(rng)));
        for (const auto& e : g.edges()) {
            EXPECT_LT(e.a_id, e.b_id);
            const auto ka = g.node(g.index_of(e.a_id)).kind, kb = g.node(g.index_of(e.b_id)).kind;
            auto base = base_kind_for(ka, kb);
            ASSERT_TRUE(base);
            if (is_section(ka) || is_section(kb)) {
                EXPECT_EQ(e.kind, LinkKind::SectionInherited);
                EXPECT_EQ(e.inherited_from, base);
            } else {
                EXPECT_EQ(e.kind, *base);
                for (auto main : {e.a_id, e.b_id}) {
                    const auto far = main == e.a_id ? e.b_id : e.a_id;
                    for (auto s : g.sections(g.index_of(main))) {
                        auto nb = g.neighbors(g.node(s).id);
                        EXPECT_TRUE(std::binary_search(nb.begin(), nb.end(), far));
                    }
                }
            }
        }
    }
}

TEST(Output, EdgesRoundTripThroughJson) {
    auto f = small_fixture();
    auto g = inherit_section_links(build_graph(f.in));
    std::vector<LinkEdge> back;
    for (const auto& e : g.edges()) back.push_back(link_edge_from_json(Json::parse(to_json(e).dump())));
    EXPECT_EQ(back, g.edges());
    std::vector<NodeInfo> nodes;
    for (NodeIndex i = 0; i < g.node_count(); ++i) nodes.push_back(g.node(i));
    auto rebuilt = graph_from_edges(g.repo(), nodes, back);
    EXPECT_EQ(rebuilt.edges(), g.edges());
    auto summary = summary_json(g);
    EXPECT_EQ(summary["edge_count"], g.edges().size());
    EXPECT_EQ(summary["edges_by_kind"]["CommitPR"], 1);
}
