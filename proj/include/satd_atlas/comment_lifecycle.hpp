#pragma once

#include "satd_atlas/comment_extract.hpp"
#include "satd_atlas/core_model.hpp"
#include "satd_atlas/git.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

namespace satd::lifecycle {

struct CommentLifecycle {
    std::string comment_id;
    RepoRef repo;
    std::string introduced_sha;
    Timestamp introduced_at{};
    std::optional<std::string> removed_sha;
    std::optional<Timestamp> removed_at;
    std::string file_path;  ///< last path the comment was seen under (renames followed)
    std::uint32_t start_line = 1;
    std::uint32_t end_line = 1;
    /// Set when a text edit replaced this comment by a new identity in the same commit.
    std::optional<std::string> successor_id;

    bool alive() const { return !removed_sha.has_value(); }
    friend bool operator==(const CommentLifecycle&, const CommentLifecycle&) = default;
};

struct LifecycleStats {
    RepoRef repo;
    std::size_t introduced_count = 0;
    std::size_t removed_count = 0;
    double resolution_rate = 0.0;
    std::vector<double> removal_days;
};

/// Result of a resolution-rate computation. `degenerate` marks the
/// introduced == 0 case, where the rate is reported as 0.
struct Rate {
    double value = 0.0;
    bool degenerate = false;
};

inline Rate resolution_rate(std::int64_t introduced, std::int64_t removed) {
    if (removed < 0 || introduced < 0) throw Error(ErrorCode::CountInversion, "negative count");
    if (removed > introduced)
        throw Error(ErrorCode::CountInversion,
                    "removed " + std::to_string(removed) + " > introduced " + std::to_string(introduced));
    if (introduced == 0) return {0.0, true};
    return {static_cast<double>(removed) / static_cast<double>(introduced), false};
}

inline std::optional<double> removal_days(const CommentLifecycle& lc) {
    if (!lc.removed_at) return std::nullopt;
    auto secs = (*lc.removed_at - lc.introduced_at).count();
    return static_cast<double>(secs) / 86400.0;
}

inline LifecycleStats lifecycle_stats(const RepoRef& repo, const std::vector<CommentLifecycle>& lcs) {
    LifecycleStats s;
    s.repo = repo;
    for (const auto& lc : lcs) {
        ++s.introduced_count;
        if (auto d = removal_days(lc)) {
            ++s.removed_count;
            s.removal_days.push_back(*d);
        }
    }
    s.resolution_rate = resolution_rate(static_cast<std::int64_t>(s.introduced_count),
                                        static_cast<std::int64_t>(s.removed_count))
                            .value;
    return s;
}

struct LifecycleResult {
    std::vector<CommentLifecycle> lifecycles;
    /// One Comment artifact per lifecycle, positioned where it was introduced.
    std::vector<Artifact> comments;
    std::vector<extract::ExtractWarning> warnings;
};

struct BuildOptions {
    /// Max line distance for pairing a removed comment with a newly
    /// introduced one in the same file and commit as an edit.
    std::uint32_t matcher_tolerance = 3;
};

namespace detail {

struct LiveInstance {
    std::size_t lifecycle_index;
    std::uint32_t last_start;
    std::uint32_t last_end;
};

// normalized text -> live instances, oldest first
using FileState = std::map<std::string, std::deque<LiveInstance>>;

} // namespace detail

/// Replays first-parent history and tracks every comment identity
/// (rename-followed path, normalized text) from introduction to removal.
/// Commit times are made non-decreasing along the walk so removal never
/// predates introduction.
inline LifecycleResult build_lifecycles(const RepoRef& repo, git::Repository& git_repo,
                                        const std::vector<git::CommitInfo>& history,
                                        const extract::ProfileTable& profiles, const BuildOptions& opts = {}) {
    if (history.empty()) throw Error(ErrorCode::EmptyHistory, repo.identifier() + " has no commits");
    LifecycleResult res;
    std::map<std::string, detail::FileState> state;
    Timestamp clock{};
    bool first = true;

    auto remove_instance = [&](const detail::LiveInstance& inst, const git::CommitInfo& c, Timestamp when) {
        auto& lc = res.lifecycles[inst.lifecycle_index];
        lc.removed_sha = c.sha;
        lc.removed_at = when;
    };

    for (const auto& commit : history) {
        Timestamp when = first ? commit.committed_at : std::max(clock, commit.committed_at);
        clock = when;
        first = false;

        for (const auto& change : git_repo.changes(commit)) {
            // Detach old state first; renames carry it to the new path.
            detail::FileState carried;
            if (!change.old_path.empty()) {
                if (auto it = state.find(change.old_path); it != state.end()) {
                    carried = std::move(it->second);
                    state.erase(it);
                }
            }
            std::optional<extract::LanguageProfile> profile;
            std::optional<std::string> blob;
            if (!change.new_path.empty()) {
                profile = profiles.detect(change.new_path);
                if (profile) blob = git_repo.read_blob(commit.sha, change.new_path);
            }
            if (!profile || !blob) {
                for (auto& [text, insts] : carried)
                    for (auto& inst : insts) remove_instance(inst, commit, when);
                continue;
            }

            auto extracted = extract::extract_comments(*blob, *profile, change.new_path);
            for (auto& w : extracted.warnings) res.warnings.push_back(std::move(w));
            std::map<std::string, std::vector<const extract::CommentSpan*>> current;
            for (const auto& s : extracted.spans) current[s.normalized_text].push_back(&s);

            std::vector<detail::LiveInstance> removed;
            std::vector<const extract::CommentSpan*> introduced;
            detail::FileState next;
            std::set<std::string> texts;
            for (auto& [t, _] : carried) texts.insert(t);
            for (auto& [t, _] : current) texts.insert(t);
            for (const auto& text : texts) {
                auto& old_insts = carried[text];
                auto& spans = current[text];
                while (old_insts.size() > spans.size()) {
                    removed.push_back(old_insts.front());
                    old_insts.pop_front();
                }
                for (std::size_t k = 0; k < old_insts.size(); ++k) {
                    old_insts[k].last_start = spans[k]->start_line;
                    old_insts[k].last_end = spans[k]->end_line;
                    res.lifecycles[old_insts[k].lifecycle_index].file_path = change.new_path;
                    res.lifecycles[old_insts[k].lifecycle_index].start_line = spans[k]->start_line;
                    res.lifecycles[old_insts[k].lifecycle_index].end_line = spans[k]->end_line;
                }
                for (std::size_t k = old_insts.size(); k < spans.size(); ++k) introduced.push_back(spans[k]);
                if (!old_insts.empty()) next[text] = std::move(old_insts);
            }

            for (const auto& inst : removed) remove_instance(inst, commit, when);

            std::sort(introduced.begin(), introduced.end(),
                      [](auto* a, auto* b) { return a->begin_offset < b->begin_offset; });
            std::vector<std::size_t> new_indices;
            for (const auto* span : introduced) {
                CommentLifecycle lc;
                lc.repo = repo;
                lc.comment_id = comment_id(repo, change.new_path, span->start_line, commit.sha, span->normalized_text);
                lc.introduced_sha = commit.sha;
                lc.introduced_at = when;
                lc.file_path = change.new_path;
                lc.start_line = span->start_line;
                lc.end_line = span->end_line;

                Artifact a = make_artifact(lc.comment_id, repo, ArtifactKind::Comment, span->text, when,
                                           commit.author_name);
                a.commit_sha = commit.sha;
                a.file_path = change.new_path;
                a.start_line = span->start_line;
                a.end_line = span->end_line;

                new_indices.push_back(res.lifecycles.size());
                next[span->normalized_text].push_back({res.lifecycles.size(), span->start_line, span->end_line});
                res.lifecycles.push_back(std::move(lc));
                res.comments.push_back(std::move(a));
            }

            // Pair edits: each removed comment with the nearest new comment within tolerance.
            std::sort(removed.begin(), removed.end(),
                      [](const auto& a, const auto& b) { return a.last_start < b.last_start; });
            std::vector<bool> taken(new_indices.size(), false);
            for (const auto& inst : removed) {
                std::optional<std::size_t> best;
                std::uint32_t best_dist = 0;
                for (std::size_t k = 0; k < new_indices.size(); ++k) {
                    if (taken[k]) continue;
                    auto line = res.lifecycles[new_indices[k]].start_line;
                    auto dist = line > inst.last_start ? line - inst.last_start : inst.last_start - line;
                    if (dist <= opts.matcher_tolerance && (!best || dist < best_dist)) {
                        best = k;
                        best_dist = dist;
                    }
                }
                if (best) {
                    taken[*best] = true;
                    res.lifecycles[inst.lifecycle_index].successor_id = res.lifecycles[new_indices[*best]].comment_id;
                }
            }

            if (!next.empty()) state[change.new_path] = std::move(next);
        }
    }
    return res;
}

inline LifecycleResult build_lifecycles(const RepoRef& repo, const extract::ProfileTable& profiles,
                                        const BuildOptions& opts = {}) {
    git::Repository git_repo(repo.clone_path);
    auto history = git_repo.first_parent_history();
    return build_lifecycles(repo, git_repo, history, profiles, opts);
}

// ---------------------------------------------------------------------------
// Serialization

inline Json to_json(const CommentLifecycle& lc) {
    return Json{{"comment_id", lc.comment_id},
                {"repo", repo_to_json(lc.repo)},
                {"introduced_sha", lc.introduced_sha},
                {"introduced_at", format_timestamp(lc.introduced_at)},
                {"removed_sha", lc.removed_sha ? Json(*lc.removed_sha) : Json(nullptr)},
                {"removed_at", lc.removed_at ? Json(format_timestamp(*lc.removed_at)) : Json(nullptr)},
                {"file_path", lc.file_path},
                {"start_line", lc.start_line},
                {"end_line", lc.end_line},
                {"successor_id", lc.successor_id ? Json(*lc.successor_id) : Json(nullptr)}};
}

inline CommentLifecycle lifecycle_from_json(const Json& j) {
    CommentLifecycle lc;
    lc.comment_id = j.at("comment_id").get<std::string>();
    lc.repo = repo_from_json(j.at("repo"));
    lc.introduced_sha = j.at("introduced_sha").get<std::string>();
    lc.introduced_at = parse_timestamp(j.at("introduced_at").get<std::string>());
    if (!j.at("removed_sha").is_null()) lc.removed_sha = j.at("removed_sha").get<std::string>();
    if (!j.at("removed_at").is_null()) lc.removed_at = parse_timestamp(j.at("removed_at").get<std::string>());
    if (lc.removed_sha.has_value() != lc.removed_at.has_value())
        throw Error(ErrorCode::SchemaMismatch, "lifecycle " + lc.comment_id + ": removed_sha/removed_at mismatch");
    lc.file_path = j.at("file_path").get<std::string>();
    lc.start_line = j.value("start_line", 1u);
    lc.end_line = j.value("end_line", lc.start_line);
    if (auto it = j.find("successor_id"); it != j.end() && !it->is_null()) lc.successor_id = it->get<std::string>();
    return lc;
}

inline std::vector<CommentLifecycle> read_lifecycles(const std::filesystem::path& path) {
    std::vector<CommentLifecycle> out;
    read_jsonl(path, [&](const Json& j, std::size_t lineno) {
        try {
            out.push_back(lifecycle_from_json(j));
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    });
    return out;
}

} // namespace satd::lifecycle
