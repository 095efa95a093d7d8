#include "chain_oracle.hpp"
#include "satd_atlas/propagation.hpp"

#include <gtest/gtest.h>

using namespace satd;
using namespace satd::propagation;
using namespace satd::testing;
using linkage::Evidence;
using linkage::GraphBuilder;

namespace {

RepoRef repo() {
    RepoRef r;
    r.owner = "o";
    r.name = "n";
    return r;
}

// issue - pr - commit - comment
LinkageGraph line_graph() {
    GraphBuilder b(repo());
    b.add_node("i", ArtifactKind::Issue);
    b.add_node("p", ArtifactKind::PullRequest);
    b.add_node("s", ArtifactKind::Commit);
    b.add_node("c", ArtifactKind::Comment);
    b.add_edge("i", "p", Evidence::TextReference);
    b.add_edge("p", "s", Evidence::MergeSHA);
    b.add_edge("s", "c", Evidence::IntroducingSHA);
    return std::move(b).finish();
}

std::set<std::vector<std::string>> collect(const LinkageGraph& g, std::size_t max_len = 4) {
    std::set<std::vector<std::string>> out;
    enumerate_chains(g, max_len, [&](const std::vector<NodeIndex>& c) {
        std::vector<std::string> ids;
        for (auto n : c) ids.push_back(g.node(n).id);
        EXPECT_TRUE(out.insert(ids).second) << "chain reported twice";
    });
    return out;
}

} // namespace

TEST(EnumerateChains, IsolatedNode) {
    GraphBuilder b(repo());
    b.add_node("c", ArtifactKind::Comment);
    auto g = std::move(b).finish();
    auto counts = enumerate_chains(g);
    EXPECT_EQ(counts.by_length[1], 1u);
    EXPECT_EQ(counts.total(), 1u);
}

TEST(EnumerateChains, LineGraph) {
    auto counts = enumerate_chains(line_graph());
    EXPECT_EQ(counts.by_length[1], 4u);
    EXPECT_EQ(counts.by_length[2], 3u);
    EXPECT_EQ(counts.by_length[3], 2u);
    EXPECT_EQ(counts.by_length[4], 1u);
    auto chains = collect(line_graph());
    EXPECT_TRUE(chains.count({"i", "p", "s", "c"}));
    EXPECT_EQ(enumerate_chains(line_graph(), 2).total(), 7u);
    EXPECT_THROW(enumerate_chains(line_graph(), 5), Error);
}

TEST(EnumerateChains, SectionsStandInForParents) {
    GraphBuilder b(repo());
    b.add_node("p", ArtifactKind::PullRequest);
    b.add_node("pt", ArtifactKind::PRSection, "p");
    b.add_node("s", ArtifactKind::Commit);
    b.add_edge("p", "s", Evidence::MergeSHA);
    b.add_edge("pt", "s", Evidence::Inheritance);
    auto chains = collect(std::move(b).finish());
    // singles p, pt, s; pairs p-s and pt-s are distinct chains
    EXPECT_EQ(chains.size(), 5u);
    EXPECT_TRUE(chains.count({"pt", "s"}));
}

TEST(EnumerateChains, MatchesBruteForceOnRandomGraphs) {
    std::mt19937 rng(2024);
    std::uint64_t long_chains = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto g = random_kind_legal_graph(rng, 40);
        auto got = collect(g);
        auto expected = brute_force_chains(g, 4);
        ASSERT_EQ(got, expected) << "trial " << trial;
        auto counts = enumerate_chains(g);
        std::array<std::uint64_t, 5> by_len{};
        for (const auto& c : expected) ++by_len[c.size()];
        EXPECT_EQ(counts.by_length, by_len);
        long_chains += by_len[4];
    }
    EXPECT_GT(long_chains, 100u);
}

TEST(EnumerateChains, MonotoneContainment) {
    std::mt19937 rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        auto chains = collect(random_kind_legal_graph(rng, 40));
        for (const auto& c : chains) {
            if (c.size() < 2) continue;
            EXPECT_TRUE(chains.count(std::vector<std::string>(c.begin() + 1, c.end())));
            EXPECT_TRUE(chains.count(std::vector<std::string>(c.begin(), c.end() - 1)));
        }
    }
}

TEST(SatdOnly, AllSatdThreeChainCounted) {
    auto g = line_graph();
    LabelMap labels{{"i", false}, {"p", true}, {"s", true}, {"c", true}};
    auto s = chain_statistics(g, labels, {{"p", 0.2}, {"s", 0.4}, {"c", 0.6}});
    EXPECT_EQ(s.rows[2].unique_chains, 2u);
    EXPECT_EQ(s.rows[2].satd_only, 1u);
    EXPECT_DOUBLE_EQ(*s.rows[2].mean_priority, 0.4);
    EXPECT_EQ(s.rows[3].satd_only, 0u);
    EXPECT_FALSE(s.rows[3].mean_priority);
    // length 2: p-s and s-c are SATD-only; nodes p,s,s,c
    EXPECT_EQ(s.rows[1].satd_only, 2u);
    EXPECT_DOUBLE_EQ(*s.rows[1].mean_priority, (0.2 + 0.4 + 0.4 + 0.6) / 4);
    EXPECT_DOUBLE_EQ(*s.rows[1].median_priority, 0.4);
}

TEST(SatdOnly, NonSatdMiddleNodeExcludes) {
    auto g = line_graph();
    LabelMap labels{{"i", true}, {"p", true}, {"s", false}, {"c", true}};
    auto s = chain_statistics(g, labels, {});
    EXPECT_EQ(s.rows[2].satd_only, 0u);
    EXPECT_EQ(s.rows[3].satd_only, 0u);
    EXPECT_EQ(s.rows[1].satd_only, 1u);
}

TEST(SatdOnly, TwoOfTenSingles) {
    GraphBuilder b(repo());
    LabelMap labels;
    for (int i = 0; i < 10; ++i) {
        b.add_node("c" + std::to_string(i), ArtifactKind::Comment);
        labels["c" + std::to_string(i)] = i < 2;
    }
    auto g = std::move(b).finish();
    auto s = chain_statistics(g, labels, {});
    EXPECT_EQ(s.rows[0].unique_chains, 10u);
    EXPECT_DOUBLE_EQ(s.rows[0].satd_only_pct, 20.0);
}

TEST(SatdOnly, MissingLabelsReportedAndExcluded) {
    auto g = line_graph();
    LabelMap labels{{"i", true}, {"p", true}, {"c", true}};
    auto s = chain_statistics(g, labels, {});
    EXPECT_EQ(s.missing_labels, std::vector<std::string>{"s"});
    EXPECT_EQ(s.rows[0].satd_only, 3u);
    EXPECT_EQ(s.rows[3].satd_only, 0u);
    EXPECT_GT(s.chains_with_missing_labels, 0u);
}

TEST(SatdOnly, ExplicitChainListAgreesWithEnumeration) {
    std::mt19937 rng(5);
    auto g = random_kind_legal_graph(rng, 40);
    LabelMap labels;
    PriorityMap pri;
    std::bernoulli_distribution coin(0.7);
    std::uniform_real_distribution<double> u(0, 1);
    for (NodeIndex i = 0; i < g.node_count(); ++i) {
        labels[g.node(i).id] = coin(rng);
        pri[g.node(i).id] = u(rng);
    }
    std::vector<std::vector<NodeIndex>> chains;
    enumerate_chains(g, 4, [&](const auto& c) { chains.push_back(c); });
    auto a = satd_only_stats(g, chains, labels, pri);
    auto b = chain_statistics(g, labels, pri);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(a.rows[k].satd_only, b.rows[k].satd_only);
        EXPECT_LE(a.rows[k].satd_only, a.rows[k].unique_chains);
        EXPECT_EQ(a.rows[k].mean_priority, b.rows[k].mean_priority);
        EXPECT_EQ(a.rows[k].median_priority, b.rows[k].median_priority);
    }
}

TEST(Depth, PublishedCountsGivePublishedPercentages) {
    auto comment = DepthTable::from_counts(ArtifactKind::Comment, {9927, 7746, 1206, 74});
    const double expected_c[] = {52.38, 40.87, 6.36, 0.39};
    auto issue = DepthTable::from_counts(ArtifactKind::Issue, {4000, 1023, 44, 17});
    const double expected_i[] = {78.68, 20.12, 0.87, 0.33};
    double sum_c = 0, sum_i = 0;
    for (std::size_t d = 1; d <= 4; ++d) {
        EXPECT_NEAR(comment.percentage(d), expected_c[d - 1], 0.01);
        EXPECT_NEAR(issue.percentage(d), expected_i[d - 1], 0.01);
        sum_c += comment.percentage(d);
        sum_i += issue.percentage(d);
    }
    EXPECT_NEAR(sum_c, 100.0, 0.05);
    EXPECT_NEAR(sum_i, 100.0, 0.05);
    EXPECT_EQ(issue.total(), 5084u);
}

TEST(Depth, LoneSatdCommentIsDepthOne) {
    GraphBuilder b(repo());
    b.add_node("c", ArtifactKind::Comment);
    auto g = std::move(b).finish();
    auto t = directional_depth(g, {{"c", true}}, ArtifactKind::Comment);
    EXPECT_EQ(t.counts[0], 1u);
    EXPECT_EQ(t.total(), 1u);
}

TEST(Depth, StopsAtFirstNonSatdArtifact) {
    auto g = line_graph();
    auto t = directional_depth(g, {{"i", true}, {"p", true}, {"s", true}, {"c", true}}, ArtifactKind::Comment);
    EXPECT_EQ(t.counts[3], 1u);
    t = directional_depth(g, {{"i", true}, {"p", false}, {"s", true}, {"c", true}}, ArtifactKind::Comment);
    EXPECT_EQ(t.counts[1], 1u);
    t = directional_depth(g, {{"i", true}, {"p", true}, {"s", false}, {"c", true}}, ArtifactKind::Issue);
    EXPECT_EQ(t.counts[1], 1u);
    t = directional_depth(g, {{"i", false}, {"c", false}}, ArtifactKind::Issue);
    EXPECT_EQ(t.total(), 0u);
    EXPECT_THROW(directional_depth(g, {}, ArtifactKind::Commit), Error);
}

TEST(Depth, SectionsAggregateToParent) {
    GraphBuilder b(repo());
    b.add_node("i", ArtifactKind::Issue);
    b.add_node("it", ArtifactKind::IssueSection, "i");
    b.add_node("p", ArtifactKind::PullRequest);
    b.add_node("pd", ArtifactKind::PRSection, "p");
    b.add_node("s", ArtifactKind::Commit);
    b.add_edge("i", "p", Evidence::TextReference);
    b.add_edge("it", "p", Evidence::Inheritance);
    b.add_edge("i", "pd", Evidence::Inheritance);
    b.add_edge("p", "s", Evidence::MergeSHA);
    b.add_edge("pd", "s", Evidence::Inheritance);
    auto g = std::move(b).finish();
    // only sections carry SATD; the issue still counts once, reaching the commit
    auto t = directional_depth(g, {{"it", true}, {"pd", true}, {"s", true}}, ArtifactKind::Issue);
    EXPECT_EQ(t.total(), 1u);
    EXPECT_EQ(t.counts[2], 1u);
}

TEST(Depth, CsvLayout) {
    auto t = DepthTable::from_counts(ArtifactKind::Comment, {9927, 7746, 1206, 74});
    EXPECT_EQ(depth_csv(t),
              "depth,path,count,percentage\n"
              "1,Comment,9927,52.38\n"
              "2,Comment>Commit,7746,40.87\n"
              "3,Comment>Commit>PullRequest,1206,6.36\n"
              "4,Comment>Commit>PullRequest>Issue,74,0.39\n"
              "total,,18953,100.00\n");
}
