#pragma once

#include "satd_atlas/error.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace satd {

using Json = nlohmann::json;
using Timestamp = std::chrono::sys_seconds;

// ---------------------------------------------------------------------------
// Time

namespace detail {

inline bool parse_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        v = v * 10 + (s[i] - '0');
    }
    out = v;
    return true;
}

} // namespace detail

/// Parses ISO-8601 timestamps (`YYYY-MM-DD`, `YYYY-MM-DDTHH:MM[:SS][.fff](Z|±HH:MM)`)
/// and normalizes them to UTC. Date-only values map to midnight UTC; a missing
/// offset is read as UTC.
inline Timestamp parse_timestamp(std::string_view s) {
    using namespace std::chrono;
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
    auto fail = [&] { return Error(ErrorCode::MalformedLine, "bad timestamp '" + std::string(s) + "'"); };
    if (!detail::parse_int(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || !detail::parse_int(s, 5, 2, mo) ||
        s[7] != '-' || !detail::parse_int(s, 8, 2, d))
        throw fail();
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw fail();
    seconds offset{0};
    std::size_t pos = 10;
    if (pos < s.size()) {
        if (s[pos] != 'T' && s[pos] != ' ') throw fail();
        if (!detail::parse_int(s, pos + 1, 2, h) || s.size() < pos + 6 || s[pos + 3] != ':' ||
            !detail::parse_int(s, pos + 4, 2, mi))
            throw fail();
        pos += 6;
        if (pos < s.size() && s[pos] == ':') {
            if (!detail::parse_int(s, pos + 1, 2, se)) throw fail();
            pos += 3;
        }
        if (pos < s.size() && s[pos] == '.') {
            ++pos;
            while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        }
        if (pos < s.size()) {
            if (s[pos] == 'Z' || s[pos] == 'z') {
                ++pos;
            } else if (s[pos] == '+' || s[pos] == '-') {
                int oh = 0, om = 0;
                if (!detail::parse_int(s, pos + 1, 2, oh)) throw fail();
                std::size_t mpos = pos + 3;
                if (mpos < s.size() && s[mpos] == ':') ++mpos;
                if (!detail::parse_int(s, mpos, 2, om)) throw fail();
                offset = hours{oh} + minutes{om};
                if (s[pos] == '-') offset = -offset;
                pos = mpos + 2;
            }
        }
        if (pos != s.size() || h > 23 || mi > 59 || se > 60) throw fail();
    }
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{se} - offset;
}

inline std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    auto day_point = floor<days>(t);
    year_month_day ymd{day_point};
    hh_mm_ss hms{t - day_point};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

inline Timestamp from_unix(std::int64_t secs) { return Timestamp{std::chrono::seconds{secs}}; }

// ---------------------------------------------------------------------------
// Small text helpers shared across modules

/// FNV-1a, 32 bit, rendered as 8 lowercase hex digits.
inline std::string hash8(std::string_view text) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : text) {
        h ^= c;
        h *= 16777619u;
    }
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", h);
    return buf;
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

/// Number of whitespace-delimited tokens.
inline std::size_t token_count(std::string_view text) {
    std::size_t n = 0;
    bool in_token = false;
    for (char c : text) {
        if (is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++n;
        }
    }
    return n;
}

inline std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

inline bool is_hex_sha(std::string_view s) {
    if (s.size() < 7 || s.size() > 64) return false;
    for (char c : s)
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    return true;
}

/// Replaces invalid UTF-8 sequences with U+FFFD.
inline std::string sanitize_utf8(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    const auto* p = reinterpret_cast<const unsigned char*>(in.data());
    const std::size_t n = in.size();
    std::size_t i = 0;
    while (i < n) {
        unsigned char c = p[i];
        std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
        bool ok = len > 0 && i + len <= n;
        for (std::size_t k = 1; ok && k < len; ++k) ok = (p[i + k] & 0xC0) == 0x80;
        if (ok && len == 2) ok = c >= 0xC2;
        if (ok && len == 3) {
            unsigned cp = ((c & 0x0Fu) << 12) | ((p[i + 1] & 0x3Fu) << 6) | (p[i + 2] & 0x3Fu);
            ok = cp >= 0x800 && !(cp >= 0xD800 && cp <= 0xDFFF);
        }
        if (ok && len == 4) {
            unsigned cp = ((c & 0x07u) << 18) | ((p[i + 1] & 0x3Fu) << 12) | ((p[i + 2] & 0x3Fu) << 6) | (p[i + 3] & 0x3Fu);
            ok = cp >= 0x10000 && cp <= 0x10FFFF;
        }
        if (ok) {
            out.append(in.substr(i, len));
            i += len;
        } else {
            out += "\xEF\xBF\xBD";
            ++i;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Domain types

struct RepoRef {
    std::string host = "github.com";
    std::string owner;
    std::string name;
    std::filesystem::path clone_path;

    std::string identifier() const { return host + "/" + owner + "/" + name; }
    /// Filesystem-safe form used for per-repository directories.
    std::string slug() const { return host + "_" + owner + "_" + name; }

    friend bool operator==(const RepoRef& a, const RepoRef& b) {
        return a.host == b.host && a.owner == b.owner && a.name == b.name;
    }
};

enum class ArtifactKind { Comment, Commit, PullRequest, Issue, PRSection, IssueSection };

inline constexpr ArtifactKind kAllKinds[] = {ArtifactKind::Comment,     ArtifactKind::Commit,
                                             ArtifactKind::PullRequest, ArtifactKind::Issue,
                                             ArtifactKind::PRSection,   ArtifactKind::IssueSection};

constexpr std::string_view to_string(ArtifactKind k) {
    switch (k) {
    case ArtifactKind::Comment: return "Comment";
    case ArtifactKind::Commit: return "Commit";
    case ArtifactKind::PullRequest: return "PullRequest";
    case ArtifactKind::Issue: return "Issue";
    case ArtifactKind::PRSection: return "PRSection";
    case ArtifactKind::IssueSection: return "IssueSection";
    }
    return "?";
}

inline ArtifactKind parse_artifact_kind(std::string_view s) {
    for (auto k : kAllKinds)
        if (to_string(k) == s) return k;
    throw Error(ErrorCode::SchemaMismatch, "unknown artifact kind '" + std::string(s) + "'");
}

constexpr bool is_section(ArtifactKind k) { return k == ArtifactKind::PRSection || k == ArtifactKind::IssueSection; }

/// Kind of the parent artifact a section belongs to; identity for main kinds.
constexpr ArtifactKind main_kind(ArtifactKind k) {
    if (k == ArtifactKind::PRSection) return ArtifactKind::PullRequest;
    if (k == ArtifactKind::IssueSection) return ArtifactKind::Issue;
    return k;
}

struct SectionRole {
    enum class Type { Title, Description, DiscussionComment };
    Type type = Type::Title;
    std::size_t index = 0;  // only meaningful for DiscussionComment

    static SectionRole title() { return {Type::Title, 0}; }
    static SectionRole description() { return {Type::Description, 0}; }
    static SectionRole discussion(std::size_t i) { return {Type::DiscussionComment, i}; }

    friend bool operator==(const SectionRole&, const SectionRole&) = default;
};

inline std::string to_string(const SectionRole& r) {
    switch (r.type) {
    case SectionRole::Type::Title: return "Title";
    case SectionRole::Type::Description: return "Description";
    case SectionRole::Type::DiscussionComment: return "DiscussionComment:" + std::to_string(r.index);
    }
    return "?";
}

inline SectionRole parse_section_role(std::string_view s) {
    if (s == "Title") return SectionRole::title();
    if (s == "Description") return SectionRole::description();
    constexpr std::string_view prefix = "DiscussionComment:";
    if (s.substr(0, prefix.size()) == prefix && s.size() > prefix.size()) {
        std::size_t idx = 0;
        for (char c : s.substr(prefix.size())) {
            if (c < '0' || c > '9') throw Error(ErrorCode::SchemaMismatch, "bad section role '" + std::string(s) + "'");
            idx = idx * 10 + static_cast<std::size_t>(c - '0');
        }
        return SectionRole::discussion(idx);
    }
    throw Error(ErrorCode::SchemaMismatch, "bad section role '" + std::string(s) + "'");
}

struct Artifact {
    std::string id;
    RepoRef repo;
    ArtifactKind kind = ArtifactKind::Comment;
    std::optional<std::string> parent_id;
    std::optional<SectionRole> role;
    std::string text;
    Timestamp created_at{};
    std::string author;
    std::optional<std::string> commit_sha;
    std::optional<std::string> file_path;
    std::optional<std::uint32_t> start_line;
    std::optional<std::uint32_t> end_line;
    std::size_t token_count = 0;
};

enum class SatdClass { CodeDesign, Documentation, Test, Requirement, Scientific, NonSATD };

inline constexpr SatdClass kDebtClasses[] = {SatdClass::CodeDesign, SatdClass::Documentation, SatdClass::Test,
                                             SatdClass::Requirement, SatdClass::Scientific};

constexpr std::string_view to_string(SatdClass c) {
    switch (c) {
    case SatdClass::CodeDesign: return "CodeDesign";
    case SatdClass::Documentation: return "Documentation";
    case SatdClass::Test: return "Test";
    case SatdClass::Requirement: return "Requirement";
    case SatdClass::Scientific: return "Scientific";
    case SatdClass::NonSATD: return "NonSATD";
    }
    return "?";
}

inline SatdClass parse_satd_class(std::string_view s) {
    for (auto c : {SatdClass::CodeDesign, SatdClass::Documentation, SatdClass::Test, SatdClass::Requirement,
                   SatdClass::Scientific, SatdClass::NonSATD})
        if (to_string(c) == s) return c;
    throw Error(ErrorCode::SchemaMismatch, "unknown SATD class '" + std::string(s) + "'");
}

enum class LabelSource { KeywordBaseline, LexiconBaseline, ExternalImport };

constexpr std::string_view to_string(LabelSource s) {
    switch (s) {
    case LabelSource::KeywordBaseline: return "KeywordBaseline";
    case LabelSource::LexiconBaseline: return "LexiconBaseline";
    case LabelSource::ExternalImport: return "ExternalImport";
    }
    return "?";
}

inline LabelSource parse_label_source(std::string_view s) {
    for (auto v : {LabelSource::KeywordBaseline, LabelSource::LexiconBaseline, LabelSource::ExternalImport})
        if (to_string(v) == s) return v;
    throw Error(ErrorCode::SchemaMismatch, "unknown label source '" + std::string(s) + "'");
}

struct SatdLabel {
    std::string artifact_id;
    bool is_satd = false;
    SatdClass satd_class = SatdClass::NonSATD;
    double confidence = 0.0;
    LabelSource source = LabelSource::KeywordBaseline;

    friend bool operator==(const SatdLabel&, const SatdLabel&) = default;
};

enum class Sentiment { Negative, NonNegative };

constexpr std::string_view to_string(Sentiment s) { return s == Sentiment::Negative ? "Negative" : "NonNegative"; }

inline Sentiment parse_sentiment(std::string_view s) {
    if (s == "Negative") return Sentiment::Negative;
    if (s == "NonNegative") return Sentiment::NonNegative;
    throw Error(ErrorCode::SchemaMismatch, "unknown sentiment label '" + std::string(s) + "'");
}

struct SentimentLabel {
    std::string artifact_id;
    Sentiment label = Sentiment::NonNegative;
    double score = 0.5;  // probability of NonNegative
    LabelSource source = LabelSource::LexiconBaseline;

    friend bool operator==(const SentimentLabel&, const SentimentLabel&) = default;
};

// ---------------------------------------------------------------------------
// Identifier scheme: `repo|kind|natural-key`

inline std::string commit_id(const RepoRef& repo, std::string_view sha) {
    return repo.identifier() + "|Commit|" + std::string(sha);
}

inline std::string pull_request_id(const RepoRef& repo, std::uint64_t number) {
    return repo.identifier() + "|PullRequest|pr" + std::to_string(number);
}

inline std::string issue_id(const RepoRef& repo, std::uint64_t number) {
    return repo.identifier() + "|Issue|issue" + std::to_string(number);
}

inline std::string section_id(const RepoRef& repo, ArtifactKind parent_kind, std::uint64_t number,
                              const SectionRole& role) {
    const bool pr = parent_kind == ArtifactKind::PullRequest;
    return repo.identifier() + (pr ? "|PRSection|pr" : "|IssueSection|issue") + std::to_string(number) + "|" +
           to_string(role);
}

/// `identity_text` is the normalized comment text, so ids survive cosmetic
/// whitespace differences between runs.
inline std::string comment_id(const RepoRef& repo, std::string_view path, std::uint32_t start_line,
                              std::string_view sha, std::string_view identity_text) {
    return repo.identifier() + "|Comment|" + std::string(path) + ":" + std::to_string(start_line) + ":" +
           std::string(sha) + ":" + hash8(identity_text);
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationResult {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

inline ValidationResult validate_artifact(const Artifact& a) {
    ValidationResult r;
    auto add = [&](std::string v) { r.violations.push_back(std::move(v)); };
    if (a.id.empty()) add("empty id");
    if (a.repo.owner.empty() || a.repo.name.empty()) add("repository owner/name empty");
    if (is_section(a.kind)) {
        if (!a.parent_id) add("section without parent");
        if (!a.role) add("section without role");
    } else {
        if (a.parent_id) add("non-section with parent");
        if (a.role) add("non-section with role");
    }
    const bool any_pos = a.file_path || a.start_line || a.end_line;
    if (any_pos && a.kind != ArtifactKind::Comment) add("file position on non-comment");
    if (a.start_line && *a.start_line < 1) add("start line below 1");
    if (a.start_line && a.end_line && *a.end_line < *a.start_line) add("line span inverted");
    if ((a.start_line.has_value()) != (a.end_line.has_value())) add("partial line span");
    if (a.kind == ArtifactKind::Commit && !a.commit_sha) add("commit without sha");
    if (a.commit_sha && !is_hex_sha(*a.commit_sha)) add("malformed commit sha");
    if (a.token_count != satd::token_count(a.text)) add("token count mismatch");
    return r;
}

// ---------------------------------------------------------------------------
// JSON

inline Json repo_to_json(const RepoRef& r) {
    return Json{{"host", r.host}, {"owner", r.owner}, {"name", r.name}, {"clone_path", r.clone_path.string()}};
}

inline RepoRef repo_from_json(const Json& j) {
    RepoRef r;
    r.host = j.value("host", std::string("github.com"));
    r.owner = j.at("owner").get<std::string>();
    r.name = j.at("name").get<std::string>();
    r.clone_path = j.value("clone_path", std::string());
    return r;
}

namespace detail {
template <class T>
Json opt(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}
template <class T>
std::optional<T> get_opt(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}
} // namespace detail

inline Json to_json(const Artifact& a) {
    Json j;
    j["id"] = a.id;
    j["repo"] = repo_to_json(a.repo);
    j["kind"] = std::string(to_string(a.kind));
    j["parent_id"] = detail::opt(a.parent_id);
    j["role"] = a.role ? Json(to_string(*a.role)) : Json(nullptr);
    j["text"] = a.text;
    j["created_at"] = format_timestamp(a.created_at);
    j["author"] = a.author;
    j["commit_sha"] = detail::opt(a.commit_sha);
    j["file_path"] = detail::opt(a.file_path);
    j["start_line"] = detail::opt(a.start_line);
    j["end_line"] = detail::opt(a.end_line);
    j["token_count"] = a.token_count;
    return j;
}

inline Artifact artifact_from_json(const Json& j) {
    Artifact a;
    a.id = j.at("id").get<std::string>();
    a.repo = repo_from_json(j.at("repo"));
    a.kind = parse_artifact_kind(j.at("kind").get<std::string>());
    a.parent_id = detail::get_opt<std::string>(j, "parent_id");
    if (auto role = detail::get_opt<std::string>(j, "role")) a.role = parse_section_role(*role);
    a.text = j.at("text").get<std::string>();
    a.created_at = parse_timestamp(j.at("created_at").get<std::string>());
    a.author = j.value("author", std::string());
    a.commit_sha = detail::get_opt<std::string>(j, "commit_sha");
    a.file_path = detail::get_opt<std::string>(j, "file_path");
    a.start_line = detail::get_opt<std::uint32_t>(j, "start_line");
    a.end_line = detail::get_opt<std::uint32_t>(j, "end_line");
    a.token_count = j.value("token_count", satd::token_count(a.text));
    return a;
}

inline Json to_json(const SatdLabel& l) {
    return Json{{"artifact_id", l.artifact_id},
                {"is_satd", l.is_satd},
                {"satd_class", std::string(to_string(l.satd_class))},
                {"confidence", l.confidence},
                {"source", std::string(to_string(l.source))}};
}

inline Json to_json(const SentimentLabel& l) {
    return Json{{"artifact_id", l.artifact_id},
                {"label", std::string(to_string(l.label))},
                {"score", l.score},
                {"source", std::string(to_string(l.source))}};
}

/// Builds a fully populated artifact and fills in token_count from the text.
inline Artifact make_artifact(std::string id, RepoRef repo, ArtifactKind kind, std::string text, Timestamp created_at,
                              std::string author) {
    Artifact a;
    a.id = std::move(id);
    a.repo = std::move(repo);
    a.kind = kind;
    a.text = std::move(text);
    a.created_at = created_at;
    a.author = std::move(author);
    a.token_count = satd::token_count(a.text);
    return a;
}

// ---------------------------------------------------------------------------
// JSON Lines

/// Reads a JSONL file, calling `fn(json, line_number)` for every non-blank line.
template <class Fn>
void read_jsonl(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw Error(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        fn(j, lineno);
    }
}

inline std::vector<Artifact> read_artifacts(const std::filesystem::path& path) {
    std::vector<Artifact> out;
    read_jsonl(path, [&](const Json& j, std::size_t lineno) {
        try {
            out.push_back(artifact_from_json(j));
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    });
    return out;
}

/// Writes to `<path>.tmp` then renames, so readers never observe a half-written file.
template <class WriteFn>
void write_file_atomic(const std::filesystem::path& path, WriteFn&& write) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        write(out);
        if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

template <class Range, class ToJson>
void write_jsonl(const std::filesystem::path& path, const Range& items, ToJson&& to_json_fn) {
    write_file_atomic(path, [&](std::ostream& out) {
        for (const auto& item : items) out << to_json_fn(item).dump() << '\n';
    });
}

inline void write_artifacts(const std::filesystem::path& path, const std::vector<Artifact>& items) {
    write_jsonl(path, items, [](const Artifact& a) { return to_json(a); });
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace satd
