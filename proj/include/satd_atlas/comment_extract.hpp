#pragma once

#include "satd_atlas/core_model.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace satd::extract {

struct LanguageProfile {
    std::string name;
    std::vector<std::string> line_markers;
    std::vector<std::pair<std::string, std::string>> block_delimiters;
    std::vector<std::string> string_delimiters;
    bool supports_nesting = false;
    // Not part of the comment grammar proper, but needed to keep the lexer honest:
    char escape_char = '\\';               // 0 disables escapes inside strings
    bool marker_requires_boundary = false;  // shell: `${#x}` is not a comment

    /// Empty result means the profile is well formed.
    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        for (const auto& m : line_markers)
            if (m.empty()) out.push_back("empty line marker");
        for (const auto& [open, close] : block_delimiters)
            if (open.empty() || close.empty()) out.push_back("empty block delimiter");
        for (const auto& s : string_delimiters)
            if (s.empty()) out.push_back("empty string delimiter");
        for (std::size_t i = 0; i < line_markers.size(); ++i)
            for (std::size_t j = 0; j < line_markers.size(); ++j)
                if (i != j && !line_markers[i].empty() && line_markers[j].rfind(line_markers[i], 0) == 0)
                    out.push_back("line marker '" + line_markers[i] + "' is a prefix of '" + line_markers[j] + "'");
        return out;
    }
};

enum class SpanKind { Line, Block };

struct CommentSpan {
    std::string file_path;
    std::uint32_t start_line = 1;
    std::uint32_t end_line = 1;
    SpanKind kind = SpanKind::Line;
    std::string raw_text;         ///< verbatim source slice, markers included
    std::string text;             ///< markers removed, original case, trimmed
    std::string normalized_text;  ///< see normalize_comment_text
    std::size_t begin_offset = 0;
    std::size_t end_offset = 0;   ///< one past the last byte

    friend bool operator==(const CommentSpan&, const CommentSpan&) = default;
};

struct ExtractWarning {
    std::string file_path;
    std::uint32_t line = 0;
    ErrorCode code = ErrorCode::Io;
    std::string message;
};

struct ExtractResult {
    std::vector<CommentSpan> spans;
    std::vector<ExtractWarning> warnings;
};

// ---------------------------------------------------------------------------
// Profiles and the extension table

inline LanguageProfile c_family_profile() {
    return {"c_cpp", {"//"}, {{"/*", "*/"}}, {"\"", "'"}, false, '\\', false};
}
inline LanguageProfile python_profile() {
    return {"python", {"#"}, {}, {"\"\"\"", "'''", "\"", "'"}, false, '\\', false};
}
inline LanguageProfile shell_profile() { return {"shell", {"#"}, {}, {"\"", "'"}, false, '\\', true}; }
inline LanguageProfile cmake_profile() { return {"cmake", {"#"}, {{"#[[", "]]"}}, {"\""}, false, '\\', false}; }
inline LanguageProfile fortran_profile() { return {"fortran", {"!"}, {}, {"\"", "'"}, false, 0, false}; }

/// Maps extensions (lowercase, with dot) and exact file names to profiles.
class ProfileTable {
public:
    void add_profile(LanguageProfile p) {
        auto problems = p.problems();
        if (!problems.empty()) throw Error(ErrorCode::Config, "profile '" + p.name + "': " + problems.front());
        auto name = p.name;
        profiles_[name] = std::move(p);
    }
    void map_extension(const std::string& ext, const std::string& profile) { extensions_[to_lower_ascii(ext)] = profile; }
    void map_filename(const std::string& file, const std::string& profile) { filenames_[file] = profile; }

    std::optional<LanguageProfile> detect(const std::filesystem::path& path) const {
        auto resolve = [&](const std::string& name) -> std::optional<LanguageProfile> {
            auto it = profiles_.find(name);
            if (it == profiles_.end()) return std::nullopt;
            return it->second;
        };
        if (auto it = filenames_.find(path.filename().string()); it != filenames_.end()) return resolve(it->second);
        if (auto it = extensions_.find(to_lower_ascii(path.extension().string())); it != extensions_.end())
            return resolve(it->second);
        return std::nullopt;
    }

    bool recognizes(const std::filesystem::path& path) const { return detect(path).has_value(); }

    static ProfileTable defaults() {
        ProfileTable t;
        for (auto p : {c_family_profile(), python_profile(), shell_profile(), cmake_profile(), fortran_profile()})
            t.add_profile(std::move(p));
        for (auto ext : {".c", ".h", ".cc", ".cpp", ".cxx", ".c++", ".hpp", ".hh", ".hxx", ".h++", ".cu", ".cuh",
                         ".inl", ".ipp", ".tpp", ".txx"})
            t.map_extension(ext, "c_cpp");
        t.map_extension(".py", "python");
        for (auto ext : {".sh", ".bash", ".zsh", ".ksh"}) t.map_extension(ext, "shell");
        t.map_extension(".cmake", "cmake");
        t.map_filename("CMakeLists.txt", "cmake");
        for (auto ext : {".f", ".for", ".f77", ".f90", ".f95", ".f03", ".f08"}) t.map_extension(ext, "fortran");
        return t;
    }

    /// Loads a JSON table:
    /// `{"profiles":[{name,line_markers,block_delimiters:[[o,c]],string_delimiters,
    ///   supports_nesting,escape_char,marker_requires_boundary}], "extensions":{...}, "filenames":{...}}`.
    static ProfileTable from_json(const Json& j) {
        ProfileTable t;
        try {
            for (const auto& pj : j.at("profiles")) {
                LanguageProfile p;
                p.name = pj.at("name").get<std::string>();
                p.line_markers = pj.value("line_markers", std::vector<std::string>{});
                for (const auto& b : pj.value("block_delimiters", Json::array()))
                    p.block_delimiters.emplace_back(b.at(0).get<std::string>(), b.at(1).get<std::string>());
                p.string_delimiters = pj.value("string_delimiters", std::vector<std::string>{});
                p.supports_nesting = pj.value("supports_nesting", false);
                auto esc = pj.value("escape_char", std::string("\\"));
                p.escape_char = esc.empty() ? '\0' : esc[0];
                p.marker_requires_boundary = pj.value("marker_requires_boundary", false);
                t.add_profile(std::move(p));
            }
            const Json extensions = j.value("extensions", Json::object());
            for (const auto& [ext, name] : extensions.items()) t.map_extension(ext, name.get<std::string>());
            const Json filenames = j.value("filenames", Json::object());
            for (const auto& [file, name] : filenames.items()) t.map_filename(file, name.get<std::string>());
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::Config, std::string("language table: ") + e.what());
        }
        return t;
    }

    static ProfileTable load(const std::filesystem::path& path) {
        try {
            return from_json(Json::parse(read_file(path)));
        } catch (const Json::parse_error& e) {
            throw Error(ErrorCode::Config, path.string() + ": " + e.what());
        }
    }

private:
    std::map<std::string, LanguageProfile> profiles_;
    std::map<std::string, std::string> extensions_;
    std::map<std::string, std::string> filenames_;
};

inline std::optional<LanguageProfile> detect_language_profile(const std::filesystem::path& path,
                                                              const ProfileTable& table = ProfileTable::defaults()) {
    return table.detect(path);
}

// ---------------------------------------------------------------------------
// Normalization

namespace detail {

inline constexpr std::string_view kLeadingMarkers[] = {"//", "/*", "*/", "#", "!"};

inline bool is_decoration(char c) { return c == '*' || c == '-' || c == '=' || c == '#' || c == '/'; }

inline std::string_view strip_line(std::string_view line) {
    bool changed = true;
    while (changed && !line.empty()) {
        changed = false;
        while (!line.empty() && is_space(line.front())) {
            line.remove_prefix(1);
            changed = true;
        }
        for (auto m : kLeadingMarkers) {
            if (line.substr(0, m.size()) == m) {
                line.remove_prefix(m.size());
                changed = true;
            }
        }
        while (!line.empty() && is_decoration(line.front())) {
            line.remove_prefix(1);
            changed = true;
        }
    }
    changed = true;
    while (changed && !line.empty()) {
        changed = false;
        while (!line.empty() && (is_space(line.back()) || is_decoration(line.back()))) {
            line.remove_suffix(1);
            changed = true;
        }
    }
    return line;
}

} // namespace detail

/// Strips comment markers and decoration, collapses whitespace, lowercases.
/// Idempotent.
inline std::string normalize_comment_text(std::string_view raw) {
    std::string out;
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        auto nl = raw.find('\n', pos);
        auto line = raw.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        line = detail::strip_line(line);
        bool pending_space = !out.empty();
        for (char c : line) {
            if (is_space(c)) {
                pending_space = !out.empty();
                continue;
            }
            if (pending_space) out += ' ';
            pending_space = false;
            out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lexer

namespace detail {

inline std::string trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return std::string(s);
}

inline bool starts_at(std::string_view text, std::size_t pos, std::string_view token) {
    return text.compare(pos, token.size(), token) == 0;
}

struct RawSpan {
    SpanKind kind;
    std::size_t begin, end;    // byte offsets of the whole comment (markers included)
    std::uint32_t start_line, end_line;
    std::string body;          // marker-stripped content
    bool own_line;             // only whitespace precedes it on its line
};

} // namespace detail

/// Single pass over the bytes with four states: code, string, line comment,
/// block comment. Consecutive own-line line comments on adjacent lines merge.
inline ExtractResult extract_comments(std::string_view file_bytes, const LanguageProfile& profile,
                                      std::string_view file_path = {}) {
    const std::string decoded = sanitize_utf8(file_bytes);
    const std::string_view src = decoded;
    ExtractResult result;

    // Longest delimiters first so `"""` wins over `"`.
    auto strings = profile.string_delimiters;
    std::stable_sort(strings.begin(), strings.end(), [](auto& a, auto& b) { return a.size() > b.size(); });
    auto markers = profile.line_markers;
    std::stable_sort(markers.begin(), markers.end(), [](auto& a, auto& b) { return a.size() > b.size(); });
    auto blocks = profile.block_delimiters;
    std::stable_sort(blocks.begin(), blocks.end(), [](auto& a, auto& b) { return a.first.size() > b.first.size(); });

    std::vector<detail::RawSpan> raw;
    std::uint32_t line = 1;
    std::size_t line_begin = 0;
    std::size_t i = 0;
    const std::size_t n = src.size();

    auto advance_to = [&](std::size_t target) {
        for (; i < target && i < n; ++i) {
            if (src[i] == '\n') {
                ++line;
                line_begin = i + 1;
            }
        }
    };
    auto own_line = [&](std::size_t pos) {
        for (std::size_t k = line_begin; k < pos; ++k)
            if (!is_space(src[k])) return false;
        return true;
    };

    while (i < n) {
        bool matched = false;
        for (const auto& [open, close] : blocks) {
            if (!detail::starts_at(src, i, open)) continue;
            const std::size_t begin = i;
            const std::uint32_t start_line = line;
            const bool alone = own_line(begin);
            std::size_t depth = 1;
            std::size_t k = i + open.size();
            std::size_t close_at = std::string_view::npos;
            while (k < n) {
                if (profile.supports_nesting && detail::starts_at(src, k, open)) {
                    ++depth;
                    k += open.size();
                } else if (detail::starts_at(src, k, close)) {
                    if (--depth == 0) {
                        close_at = k;
                        break;
                    }
                    k += close.size();
                } else {
                    ++k;
                }
            }
            std::size_t end;
            std::string body;
            if (close_at == std::string_view::npos) {
                end = n;
                body = detail::trim(src.substr(begin + open.size()));
            } else {
                end = close_at + close.size();
                body = detail::trim(src.substr(begin + open.size(), close_at - begin - open.size()));
            }
            advance_to(end);
            // A block ending in a newline-terminated EOF still belongs to the last content line.
            std::uint32_t end_line = line;
            if (end > begin && src[end - 1] == '\n') --end_line;
            if (close_at == std::string_view::npos)
                result.warnings.push_back({std::string(file_path), start_line, ErrorCode::Io,
                                           "UnbalancedBlockComment: block opened at line " +
                                               std::to_string(start_line) + " never closed"});
            raw.push_back({SpanKind::Block, begin, end, start_line, std::max(start_line, end_line), std::move(body), alone});
            matched = true;
            break;
        }
        if (matched) continue;

        for (const auto& marker : markers) {
            if (!detail::starts_at(src, i, marker)) continue;
            if (profile.marker_requires_boundary && i > line_begin) {
                char prev = src[i - 1];
                if (!(is_space(prev) || prev == ';' || prev == '&' || prev == '|' || prev == '(' || prev == ')'))
                    break;
            }
            const std::size_t begin = i;
            std::size_t eol = src.find('\n', i);
            if (eol == std::string_view::npos) eol = n;
            std::size_t end = eol;
            if (end > begin && src[end - 1] == '\r') --end;
            raw.push_back({SpanKind::Line, begin, end, line, line,
                           detail::trim(src.substr(begin + marker.size(), end - begin - marker.size())),
                           own_line(begin)});
            advance_to(eol);
            matched = true;
            break;
        }
        if (matched) continue;

        for (const auto& delim : strings) {
            if (!detail::starts_at(src, i, delim)) continue;
            const bool multiline = delim.size() > 1;
            std::size_t k = i + delim.size();
            while (k < n) {
                if (profile.escape_char && src[k] == profile.escape_char) {
                    k += 2;
                    continue;
                }
                if (!multiline && src[k] == '\n') break;  // unterminated short string ends at EOL
                if (detail::starts_at(src, k, delim)) {
                    k += delim.size();
                    break;
                }
                ++k;
            }
            advance_to(std::min(k, n));
            matched = true;
            break;
        }
        if (matched) continue;
        advance_to(i + 1);
    }

    // Merge runs of own-line line comments on adjacent lines.
    std::vector<detail::RawSpan> merged;
    for (auto& s : raw) {
        if (!merged.empty() && s.kind == SpanKind::Line && s.own_line && merged.back().kind == SpanKind::Line &&
            merged.back().end_line + 1 == s.start_line) {
            auto& prev = merged.back();
            prev.end_line = s.end_line;
            prev.end = s.end;
            prev.body += '\n';
            prev.body += s.body;
            continue;
        }
        merged.push_back(std::move(s));
    }

    for (auto& s : merged) {
        CommentSpan span;
        span.file_path = std::string(file_path);
        span.start_line = s.start_line;
        span.end_line = s.end_line;
        span.kind = s.kind;
        span.raw_text = std::string(src.substr(s.begin, s.end - s.begin));
        span.text = s.body;
        span.normalized_text = normalize_comment_text(s.body);
        span.begin_offset = s.begin;
        span.end_offset = s.end;
        if (span.normalized_text.empty()) continue;
        result.spans.push_back(std::move(span));
    }
    return result;
}

/// Number of lines as an editor shows them (a trailing newline does not open a new line).
inline std::uint32_t line_count(std::string_view bytes) {
    if (bytes.empty()) return 0;
    auto n = static_cast<std::uint32_t>(std::count(bytes.begin(), bytes.end(), '\n'));
    return bytes.back() == '\n' ? n : n + 1;
}

/// Converts spans of one file into Comment artifacts.
inline std::vector<Artifact> to_artifacts(const std::vector<CommentSpan>& spans, const RepoRef& repo,
                                          const std::optional<std::string>& sha, Timestamp when,
                                          const std::string& author) {
    std::vector<Artifact> out;
    out.reserve(spans.size());
    for (const auto& s : spans) {
        Artifact a = make_artifact(comment_id(repo, s.file_path, s.start_line, sha.value_or(""), s.normalized_text),
                                   repo, ArtifactKind::Comment, s.text, when, author);
        a.commit_sha = sha;
        a.file_path = s.file_path;
        a.start_line = s.start_line;
        a.end_line = s.end_line;
        out.push_back(std::move(a));
    }
    return out;
}

/// Walks a plain directory tree (no git) in sorted path order.
inline std::vector<Artifact> extract_tree(const std::filesystem::path& root, const RepoRef& repo,
                                          const ProfileTable& table, std::vector<ExtractWarning>* warnings = nullptr) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw Error(ErrorCode::CloneUnavailable, root.string() + " is not a directory");
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_directory() && it->path().filename() == ".git") {
            it.disable_recursion_pending();
            continue;
        }
        if (it->is_regular_file()) files.push_back(fs::relative(it->path(), root));
    }
    std::sort(files.begin(), files.end());
    std::vector<Artifact> out;
    for (const auto& rel : files) {
        auto profile = table.detect(rel);
        if (!profile) continue;
        auto res = extract_comments(read_file(root / rel), *profile, rel.generic_string());
        if (warnings) warnings->insert(warnings->end(), res.warnings.begin(), res.warnings.end());
        auto arts = to_artifacts(res.spans, repo, std::nullopt, Timestamp{}, "");
        out.insert(out.end(), std::make_move_iterator(arts.begin()), std::make_move_iterator(arts.end()));
    }
    return out;
}

} // namespace satd::extract
