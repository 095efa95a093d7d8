#pragma once

#include "satd_atlas/core_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace satd {

/// Forge-side metadata for a pull request, stored next to its artifact in
/// the cache. The artifact text is the title and body joined by a blank line.
struct PullRequestRecord {
    Artifact artifact;
    std::uint64_t number = 0;
    std::string title;
    std::string body;
    std::string state;
    Timestamp updated_at{};
    std::optional<std::string> merge_sha;
    std::vector<std::string> commit_shas;
    std::vector<std::uint64_t> linked_issues;
    /// Number of plain discussion comments; review comments follow them.
    std::size_t discussion_count = 0;
    std::size_t review_count = 0;
};

struct IssueRecord {
    Artifact artifact;
    std::uint64_t number = 0;
    std::string title;
    std::string body;
    std::string state;
    Timestamp updated_at{};
    std::size_t discussion_count = 0;
};

inline std::string join_title_body(const std::string& title, const std::string& body) {
    if (body.empty()) return title;
    if (title.empty()) return body;
    return title + "\n\n" + body;
}

inline Json to_json(const PullRequestRecord& r) {
    Json j{{"artifact", to_json(r.artifact)},
           {"number", r.number},
           {"title", r.title},
           {"body", r.body},
           {"state", r.state},
           {"updated_at", format_timestamp(r.updated_at)},
           {"merge_sha", r.merge_sha ? Json(*r.merge_sha) : Json(nullptr)},
           {"commit_shas", r.commit_shas},
           {"linked_issues", r.linked_issues},
           {"discussion_count", r.discussion_count},
           {"review_count", r.review_count}};
    return j;
}

inline PullRequestRecord pull_request_from_json(const Json& j) {
    PullRequestRecord r;
    r.artifact = artifact_from_json(j.at("artifact"));
    r.number = j.at("number").get<std::uint64_t>();
    r.title = j.value("title", "");
    r.body = j.value("body", "");
    r.state = j.value("state", "");
    r.updated_at = parse_timestamp(j.at("updated_at").get<std::string>());
    if (auto it = j.find("merge_sha"); it != j.end() && !it->is_null()) r.merge_sha = it->get<std::string>();
    r.commit_shas = j.value("commit_shas", std::vector<std::string>{});
    r.linked_issues = j.value("linked_issues", std::vector<std::uint64_t>{});
    r.discussion_count = j.value("discussion_count", std::size_t{0});
    r.review_count = j.value("review_count", std::size_t{0});
    return r;
}

inline Json to_json(const IssueRecord& r) {
    return Json{{"artifact", to_json(r.artifact)},
                {"number", r.number},
                {"title", r.title},
                {"body", r.body},
                {"state", r.state},
                {"updated_at", format_timestamp(r.updated_at)},
                {"discussion_count", r.discussion_count}};
}

inline IssueRecord issue_from_json(const Json& j) {
    IssueRecord r;
    r.artifact = artifact_from_json(j.at("artifact"));
    r.number = j.at("number").get<std::uint64_t>();
    r.title = j.value("title", "");
    r.body = j.value("body", "");
    r.state = j.value("state", "");
    r.updated_at = parse_timestamp(j.at("updated_at").get<std::string>());
    r.discussion_count = j.value("discussion_count", std::size_t{0});
    return r;
}

template <class T, class F>
std::vector<T> read_records(const std::filesystem::path& path, F from_json) {
    std::vector<T> out;
    read_jsonl(path, [&](const Json& j, std::size_t lineno) {
        try {
            out.push_back(from_json(j));
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    });
    return out;
}

inline std::vector<PullRequestRecord> read_pull_requests(const std::filesystem::path& path) {
    return read_records<PullRequestRecord>(path, pull_request_from_json);
}

inline std::vector<IssueRecord> read_issues(const std::filesystem::path& path) {
    return read_records<IssueRecord>(path, issue_from_json);
}

} // namespace satd
