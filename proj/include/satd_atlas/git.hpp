#pragma once

#include "satd_atlas/core_model.hpp"
#include "satd_atlas/subprocess.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace satd::git {

struct CommitInfo {
    std::string sha;
    std::optional<std::string> first_parent;
    Timestamp committed_at{};
    Timestamp authored_at{};
    std::string author_name;
    std::string author_email;
    std::string message;
};

enum class ChangeType { Added, Deleted, Modified, Renamed };

struct FileChange {
    ChangeType type = ChangeType::Modified;
    std::string old_path;  // empty for Added
    std::string new_path;  // empty for Deleted
};

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        auto k = s.find(sep, pos);
        out.emplace_back(s.substr(pos, k == std::string_view::npos ? std::string_view::npos : k - pos));
        if (k == std::string_view::npos) break;
        pos = k + 1;
    }
    return out;
}

} // namespace detail

/// Thin wrapper over the git command line. Blob reads go through one
/// long-lived `git cat-file --batch` child.
class Repository {
public:
    explicit Repository(std::filesystem::path path) : path_(std::move(path)) {
        if (!std::filesystem::exists(path_))
            throw Error(ErrorCode::CloneUnavailable, path_.string() + " does not exist");
        auto r = run_command({"git", "-C", path_.string(), "rev-parse", "--git-dir"});
        if (r.exit_code != 0) throw Error(ErrorCode::CloneUnavailable, path_.string() + " is not a git repository");
    }

    static bool is_repository(const std::filesystem::path& path) {
        if (!std::filesystem::is_directory(path)) return false;
        return run_command({"git", "-C", path.string(), "rev-parse", "--git-dir"}).exit_code == 0;
    }

    const std::filesystem::path& path() const { return path_; }

    std::string head_sha() const {
        auto r = git({"rev-parse", "--verify", "-q", "HEAD"});
        if (r.exit_code != 0) throw Error(ErrorCode::EmptyHistory, path_.string() + " has no commits");
        return trim_nl(r.out);
    }

    /// Mainline history, root first.
    std::vector<CommitInfo> first_parent_history() const {
        head_sha();
        return parse_log(git({"log", "--first-parent", "--reverse", "-z",
                              "--format=%H%x1f%P%x1f%ct%x1f%at%x1f%an%x1f%ae%x1f%B"})
                             .out);
    }

    /// Every commit reachable from HEAD (all parents).
    std::vector<CommitInfo> full_history() const {
        head_sha();
        return parse_log(git({"log", "-z", "--format=%H%x1f%P%x1f%ct%x1f%at%x1f%an%x1f%ae%x1f%B"}).out);
    }

    std::vector<FileChange> changes(const CommitInfo& c) const {
        std::vector<std::string> args{"diff-tree", "-r", "-M", "-z", "--no-commit-id", "--name-status"};
        if (c.first_parent) {
            args.push_back(*c.first_parent);
            args.push_back(c.sha);
        } else {
            args.push_back("--root");
            args.push_back(c.sha);
        }
        auto out = git(args).out;
        auto fields = detail::split(out, '\0');
        std::vector<FileChange> changes;
        for (std::size_t i = 0; i < fields.size() && !fields[i].empty();) {
            const char st = fields[i][0];
            FileChange fc;
            if (st == 'R' || st == 'C') {
                if (i + 2 >= fields.size()) break;
                fc.old_path = fields[i + 1];
                fc.new_path = fields[i + 2];
                fc.type = st == 'R' ? ChangeType::Renamed : ChangeType::Added;
                if (st == 'C') fc.old_path.clear();
                i += 3;
            } else {
                if (i + 1 >= fields.size()) break;
                const auto& p = fields[i + 1];
                if (st == 'A') {
                    fc.type = ChangeType::Added;
                    fc.new_path = p;
                } else if (st == 'D') {
                    fc.type = ChangeType::Deleted;
                    fc.old_path = p;
                } else {
                    fc.type = ChangeType::Modified;
                    fc.old_path = fc.new_path = p;
                }
                i += 2;
            }
            changes.push_back(std::move(fc));
        }
        return changes;
    }

    std::vector<std::string> tracked_files(const std::string& rev) const {
        auto r = git({"ls-tree", "-r", "-z", "--name-only", rev});
        std::vector<std::string> out;
        for (auto& f : detail::split(r.out, '\0'))
            if (!f.empty()) out.push_back(std::move(f));
        return out;
    }

    /// Contents of `rev:path`, or nullopt if the object does not exist.
    std::optional<std::string> read_blob(const std::string& rev, const std::string& path) {
        if (!cat_file_) cat_file_ = std::make_unique<Subprocess>(std::vector<std::string>{
                            "git", "-C", path_.string(), "cat-file", "--batch"});
        if (!cat_file_->write(rev + ":" + path + "\n"))
            throw Error(ErrorCode::Io, "git cat-file terminated unexpectedly");
        auto header = cat_file_->read_line();
        if (!header) throw Error(ErrorCode::Io, "git cat-file terminated unexpectedly");
        if (header->size() >= 8 && header->compare(header->size() - 8, 8, " missing") == 0) return std::nullopt;
        auto parts = detail::split(*header, ' ');
        if (parts.size() != 3) return std::nullopt;  // "ambiguous" and similar
        const auto size = static_cast<std::size_t>(std::stoull(parts[2]));
        auto content = cat_file_->read_exact(size + 1);
        content.pop_back();
        if (parts[1] != "blob") return std::nullopt;
        return content;
    }

private:
    CommandResult git(std::vector<std::string> args) const {
        std::vector<std::string> argv{"git", "-C", path_.string(), "-c", "core.quotepath=off"};
        argv.insert(argv.end(), args.begin(), args.end());
        return run_command(argv);
    }

    static std::string trim_nl(std::string s) {
        while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
        return s;
    }

    static std::vector<CommitInfo> parse_log(const std::string& out) {
        std::vector<CommitInfo> commits;
        for (auto& rec : detail::split(out, '\0')) {
            std::string_view r = rec;
            while (!r.empty() && r.front() == '\n') r.remove_prefix(1);
            if (r.empty()) continue;
            auto f = detail::split(r, '\x1f');
            if (f.size() < 7) continue;
            CommitInfo c;
            c.sha = f[0];
            auto parents = detail::split(f[1], ' ');
            if (!parents.empty() && !parents[0].empty()) c.first_parent = parents[0];
            c.committed_at = from_unix(std::stoll(f[2]));
            c.authored_at = from_unix(std::stoll(f[3]));
            c.author_name = f[4];
            c.author_email = f[5];
            c.message = trim_nl(f[6]);
            commits.push_back(std::move(c));
        }
        return commits;
    }

    std::filesystem::path path_;
    std::unique_ptr<Subprocess> cat_file_;
};

} // namespace satd::git
