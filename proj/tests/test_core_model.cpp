#include "satd_atlas/core_model.hpp"

#include <gtest/gtest.h>

using namespace satd;

namespace {

RepoRef repo() { return RepoRef{"github.com", "ornl", "solver", "/tmp/solver"}; }

Artifact commit_artifact() {
    Artifact a = make_artifact(commit_id(repo(), "0123456789abcdef0123456789abcdef01234567"), repo(),
                               ArtifactKind::Commit, "Fix boundary handling in the solver",
                               parse_timestamp("2021-03-04T05:06:07Z"), "Ada");
    a.commit_sha = "0123456789abcdef0123456789abcdef01234567";
    return a;
}

bool has_violation(const ValidationResult& r, const std::string& v) {
    return std::find(r.violations.begin(), r.violations.end(), v) != r.violations.end();
}

} // namespace

TEST(ValidateArtifact, WellFormedCommitIsOk) {
    auto r = validate_artifact(commit_artifact());
    EXPECT_TRUE(r.ok()) << (r.violations.empty() ? "" : r.violations.front());
}

TEST(ValidateArtifact, SectionWithoutParent) {
    Artifact a = make_artifact("x", repo(), ArtifactKind::PRSection, "title text", Timestamp{}, "bob");
    a.role = SectionRole::title();
    auto r = validate_artifact(a);
    EXPECT_TRUE(has_violation(r, "section without parent"));
}

TEST(ValidateArtifact, InvertedLineSpan) {
    Artifact a = make_artifact("c", repo(), ArtifactKind::Comment, "TODO", Timestamp{}, "");
    a.file_path = "a.c";
    a.start_line = 5;
    a.end_line = 3;
    EXPECT_TRUE(has_violation(validate_artifact(a), "line span inverted"));
}

TEST(ValidateArtifact, ReportsEveryViolation) {
    Artifact a;
    a.kind = ArtifactKind::Comment;
    a.parent_id = "p";
    a.text = "two tokens";
    a.token_count = 7;
    auto r = validate_artifact(a);
    EXPECT_TRUE(has_violation(r, "empty id"));
    EXPECT_TRUE(has_violation(r, "repository owner/name empty"));
    EXPECT_TRUE(has_violation(r, "non-section with parent"));
    EXPECT_TRUE(has_violation(r, "token count mismatch"));
}

TEST(Timestamps, NormalizesToUtc) {
    EXPECT_EQ(format_timestamp(parse_timestamp("2020-01-01")), "2020-01-01T00:00:00Z");
    EXPECT_EQ(format_timestamp(parse_timestamp("2020-01-01T02:30:00+02:00")), "2020-01-01T00:30:00Z");
    EXPECT_EQ(format_timestamp(parse_timestamp("2019-12-31T23:00:00-01:00")), "2020-01-01T00:00:00Z");
    EXPECT_EQ(format_timestamp(parse_timestamp("2020-02-29T10:11:12.345Z")), "2020-02-29T10:11:12Z");
    EXPECT_THROW(parse_timestamp("2020-02-30"), Error);
    EXPECT_THROW(parse_timestamp("yesterday"), Error);
}

TEST(TokenCount, WhitespaceDelimited) {
    EXPECT_EQ(token_count(""), 0u);
    EXPECT_EQ(token_count("   "), 0u);
    EXPECT_EQ(token_count("a"), 1u);
    EXPECT_EQ(token_count("  TODO:\tfix\n this  "), 3u);
}

TEST(IdScheme, DeterministicAcrossRuns) {
    auto a = comment_id(repo(), "src/a.c", 3, "abc1234", "todo x");
    auto b = comment_id(repo(), "src/a.c", 3, "abc1234", "todo x");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.rfind("github.com/ornl/solver|Comment|src/a.c:3:abc1234:", 0), 0u);
    EXPECT_EQ(section_id(repo(), ArtifactKind::PullRequest, 10, SectionRole::discussion(2)),
              "github.com/ornl/solver|PRSection|pr10|DiscussionComment:2");
    EXPECT_EQ(issue_id(repo(), 3), "github.com/ornl/solver|Issue|issue3");
}

TEST(ArtifactJson, RoundTripPreservesEveryField) {
    Artifact s = make_artifact(section_id(repo(), ArtifactKind::Issue, 4, SectionRole::discussion(1)), repo(),
                               ArtifactKind::IssueSection, "we assume a uniform grid", parse_timestamp("2022-06-01"),
                               "carol");
    s.parent_id = issue_id(repo(), 4);
    s.role = SectionRole::discussion(1);
    for (const Artifact& a : {commit_artifact(), s}) {
        auto j = to_json(a);
        Artifact b = artifact_from_json(Json::parse(j.dump()));
        EXPECT_EQ(to_json(b), j);
    }
    auto j = to_json(s);
    for (auto key : {"id", "repo", "kind", "parent_id", "role", "text", "created_at", "author", "commit_sha",
                     "file_path", "start_line", "end_line", "token_count"})
        EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Utf8, InvalidBytesAreReplaced) {
    EXPECT_EQ(sanitize_utf8("ok"), "ok");
    EXPECT_EQ(sanitize_utf8("a\xff" "b"), "a\xEF\xBF\xBD" "b");
    EXPECT_EQ(sanitize_utf8("\xC3\xA9"), "\xC3\xA9");
    EXPECT_EQ(sanitize_utf8("\xC3"), "\xEF\xBF\xBD");
}
