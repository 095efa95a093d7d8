#pragma once

#include "satd_atlas/core_model.hpp"
#include "satd_atlas/priority.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace satd::config {

// ---------------------------------------------------------------------------
// TOML subset: tables, arrays of tables, dotted keys, basic and literal
// strings, integers, floats, booleans, arrays and inline tables. Dates are
// read as strings by the caller.

class TomlReader {
public:
    explicit TomlReader(std::string_view text) : s_(text) {}

    Json parse() {
        Json root = Json::object();
        Json* current = &root;
        while (true) {
            skip_ws_and_comments(true);
            if (eof()) break;
            if (peek() == '[') {
                const bool array = s_.substr(pos_, 2) == "[[";
                pos_ += array ? 2 : 1;
                auto path = key_path();
                skip_inline_ws();
                if (!consume(array ? "]]" : "]")) fail("expected closing bracket");
                current = array ? &append_table(root, path) : &table_at(root, path, true);
            } else {
                auto path = key_path();
                skip_inline_ws();
                if (!consume("=")) fail("expected '='");
                skip_inline_ws();
                Json* t = current;
                for (std::size_t i = 0; i + 1 < path.size(); ++i) t = &child_table(*t, path[i]);
                if (t->contains(path.back())) fail("duplicate key '" + path.back() + "'");
                (*t)[path.back()] = value();
            }
            skip_inline_ws();
            if (!eof() && peek() == '#') skip_comment();
            if (!eof() && !consume("\n") && !consume("\r\n")) fail("expected end of line");
        }
        return root;
    }

    /// A single value, e.g. a command-line override.
    Json parse_value() {
        skip_inline_ws();
        auto v = value();
        skip_inline_ws();
        if (!eof()) fail("trailing characters");
        return v;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        std::size_t line = 1 + static_cast<std::size_t>(std::count(s_.begin(), s_.begin() + static_cast<long>(std::min(pos_, s_.size())), '\n'));
        throw Error(ErrorCode::Config, "TOML line " + std::to_string(line) + ": " + msg);
    }

    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return s_[pos_]; }
    bool consume(std::string_view tok) {
        if (s_.substr(pos_, tok.size()) != tok) return false;
        pos_ += tok.size();
        return true;
    }
    void skip_inline_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }
    void skip_comment() {
        while (!eof() && peek() != '\n') ++pos_;
    }
    void skip_ws_and_comments(bool newlines) {
        while (!eof()) {
            const char c = peek();
            if (c == ' ' || c == '\t' || (newlines && (c == '\n' || c == '\r'))) ++pos_;
            else if (c == '#') skip_comment();
            else break;
        }
    }

    std::string key() {
        skip_inline_ws();
        if (eof()) fail("expected key");
        if (peek() == '"') return basic_string();
        if (peek() == '\'') return literal_string();
        std::string k;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) k += s_[pos_++];
        if (k.empty()) fail("expected key");
        return k;
    }

    std::vector<std::string> key_path() {
        std::vector<std::string> path{key()};
        skip_inline_ws();
        while (consume(".")) {
            path.push_back(key());
            skip_inline_ws();
        }
        return path;
    }

    Json& child_table(Json& t, const std::string& k) {
        if (!t.contains(k)) t[k] = Json::object();
        Json* c = &t[k];
        if (c->is_array() && !c->empty() && c->back().is_object()) c = &c->back();
        if (!c->is_object()) fail("'" + k + "' is not a table");
        return *c;
    }

    Json& table_at(Json& root, const std::vector<std::string>& path, bool header) {
        if (header && !defined_.insert(join(path)).second) fail("table [" + join(path) + "] defined twice");
        Json* t = &root;
        for (const auto& k : path) t = &child_table(*t, k);
        return *t;
    }

    Json& append_table(Json& root, const std::vector<std::string>& path) {
        Json* t = &root;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) t = &child_table(*t, path[i]);
        auto& arr = (*t)[path.back()];
        if (arr.is_null()) arr = Json::array();
        if (!arr.is_array()) fail("'" + path.back() + "' is not an array of tables");
        arr.push_back(Json::object());
        return arr.back();
    }

    static std::string join(const std::vector<std::string>& p) {
        std::string out;
        for (const auto& k : p) out += (out.empty() ? "" : ".") + k;
        return out;
    }

    Json value() {
        if (eof()) fail("expected value");
        const char c = peek();
        if (c == '"') return basic_string();
        if (c == '\'') return literal_string();
        if (c == '[') return array();
        if (c == '{') return inline_table();
        if (consume("true")) return true;
        if (consume("false")) return false;
        return number();
    }

    std::string basic_string() {
        if (s_.substr(pos_, 3) == "\"\"\"") fail("multi-line strings are not supported");
        ++pos_;
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = s_[pos_++];
            if (c == '"') break;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (eof()) fail("unterminated escape");
            char e = s_[pos_++];
            switch (e) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case 'r': out += '\r'; break;
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            case 'u': {
                if (pos_ + 4 > s_.size()) fail("short \\u escape");
                auto cp = static_cast<std::uint32_t>(std::stoul(std::string(s_.substr(pos_, 4)), nullptr, 16));
                pos_ += 4;
                if (cp < 0x80) {
                    out += static_cast<char>(cp);
                } else if (cp < 0x800) {
                    out += static_cast<char>(0xC0 | (cp >> 6));
                    out += static_cast<char>(0x80 | (cp & 0x3F));
                } else {
                    out += static_cast<char>(0xE0 | (cp >> 12));
                    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
                    out += static_cast<char>(0x80 | (cp & 0x3F));
                }
                break;
            }
            default: fail(std::string("unknown escape \\") + e);
            }
        }
        return out;
    }

    std::string literal_string() {
        ++pos_;
        auto end = s_.find('\'', pos_);
        if (end == std::string_view::npos || s_.substr(pos_, end - pos_).find('\n') != std::string_view::npos)
            fail("unterminated string");
        std::string out(s_.substr(pos_, end - pos_));
        pos_ = end + 1;
        return out;
    }

    Json array() {
        ++pos_;
        Json arr = Json::array();
        while (true) {
            skip_ws_and_comments(true);
            if (consume("]")) return arr;
            arr.push_back(value());
            skip_ws_and_comments(true);
            if (consume("]")) return arr;
            if (!consume(",")) fail("expected ',' or ']' in array");
        }
    }

    Json inline_table() {
        ++pos_;
        Json t = Json::object();
        skip_inline_ws();
        if (consume("}")) return t;
        while (true) {
            auto path = key_path();
            if (!consume("=")) fail("expected '=' in inline table");
            skip_inline_ws();
            Json* sub = &t;
            for (std::size_t i = 0; i + 1 < path.size(); ++i) sub = &child_table(*sub, path[i]);
            if (sub->contains(path.back())) fail("duplicate key '" + path.back() + "'");
            (*sub)[path.back()] = value();
            skip_inline_ws();
            if (consume("}")) return t;
            if (!consume(",")) fail("expected ',' or '}' in inline table");
            skip_inline_ws();
        }
    }

    Json number() {
        std::string tok;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                          peek() == '.' || peek() == '_'))
            tok += s_[pos_++];
        std::string clean;
        for (char c : tok)
            if (c != '_') clean += c;
        if (clean.empty()) fail("expected value");
        try {
            std::size_t used = 0;
            if (clean.find_first_of(".eE") == std::string::npos) {
                auto v = std::stoll(clean, &used);
                if (used == clean.size()) return v;
            } else {
                auto v = std::stod(clean, &used);
                if (used == clean.size()) return v;
            }
        } catch (const std::exception&) {
        }
        fail("bad value '" + tok + "'");
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::set<std::string> defined_;
};

inline Json parse_toml(std::string_view text) { return TomlReader(text).parse(); }

/// JSON when the file ends in .json or starts with '{', TOML otherwise.
inline Json parse_config_text(std::string_view text, const std::filesystem::path& name) {
    auto first = text.find_first_not_of(" \t\r\n");
    if (name.extension() == ".json" || (first != std::string_view::npos && text[first] == '{')) {
        try {
            return Json::parse(text);
        } catch (const Json::parse_error& e) {
            throw Error(ErrorCode::Config, name.string() + ": " + e.what());
        }
    }
    return parse_toml(text);
}

/// `s` as a TOML basic string.
inline std::string toml_quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

/// Sets `dotted.key` to a value written in TOML syntax; bare words that do
/// not parse are taken as strings.
inline void apply_override(Json& root, const std::string& dotted, const std::string& raw) {
    Json v;
    try {
        v = TomlReader(raw).parse_value();
    } catch (const Error&) {
        v = raw;
    }
    Json* t = &root;
    std::size_t start = 0;
    while (true) {
        auto dot = dotted.find('.', start);
        auto k = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (k.empty()) throw Error(ErrorCode::Config, "bad override key '" + dotted + "'");
        if (dot == std::string::npos) {
            (*t)[k] = v;
            return;
        }
        if (!t->contains(k) || !(*t)[k].is_object()) (*t)[k] = Json::object();
        t = &(*t)[k];
        start = dot + 1;
    }
}

// ---------------------------------------------------------------------------
// Run configuration

struct Selection {
    std::uint64_t min_commits = 10000;
    std::uint64_t min_contributors = 20;
    std::uint64_t min_stars = 40;
    double min_age_years = 2.0;
    std::uint64_t activity_window_months = 4;
    std::optional<Timestamp> as_of;
};

/// A candidate repository. Metadata fields are optional; missing commit and
/// contributor counts are taken from the clone.
struct RepoConfig {
    RepoRef ref;
    std::optional<std::filesystem::path> sonar;
    std::optional<std::uint64_t> commits;
    std::optional<std::uint64_t> contributors;
    std::optional<std::uint64_t> stars;
    std::optional<Timestamp> created_at;
    std::optional<Timestamp> last_activity;
};

struct ProviderConfig {
    std::vector<std::string> command;
    std::optional<std::filesystem::path> vectors;
};

struct RunConfig {
    std::filesystem::path base_dir;
    Json raw;  // after overrides, as written

    std::vector<RepoConfig> repos;
    Selection selection;
    std::filesystem::path work_dir = "work";
    std::filesystem::path cache_dir = "cache";
    std::optional<std::filesystem::path> patterns;
    std::optional<std::filesystem::path> languages;
    std::optional<std::filesystem::path> lexicon;
    std::optional<std::filesystem::path> priority_terms;
    std::optional<std::filesystem::path> satd_predictions;
    std::optional<std::filesystem::path> sentiment_predictions;
    priority::Heuristic heuristic = priority::Heuristic::EmbeddingCentroid;
    ProviderConfig provider;
    bool offline = false;
    bool include_review_comments = true;
    bool reverse_issue_refs = false;
    std::size_t max_chain_length = 4;
    std::size_t bins = 10;
    std::size_t min_tokens = 10;
    std::uint32_t sonar_window = 2;
    std::size_t top_k = 25;
    std::size_t concurrency = 4;
    std::string api_base = "https://api.github.com";
    std::optional<std::filesystem::path> token_file;
};

namespace detail {

class Reader {
public:
    Reader(const Json& j, std::string where, const std::filesystem::path& base) : j_(j), where_(std::move(where)), base_(base) {
        if (!j_.is_object()) throw Error(ErrorCode::Config, where_ + " must be a table");
    }

    template <class T>
    void get(const char* key, T& out) {
        auto it = take(key);
        if (!it) return;
        try {
            if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
                auto v = it->get<std::int64_t>();
                if (v < 0) throw Error(ErrorCode::Config, name(key) + " must be non-negative");
                out = static_cast<T>(v);
            } else if constexpr (std::is_same_v<T, double>) {
                if (!it->is_number()) throw Error(ErrorCode::Config, name(key) + " must be a number");
                out = it->get<double>();
                if (out < 0) throw Error(ErrorCode::Config, name(key) + " must be non-negative");
            } else {
                out = it->get<T>();
            }
        } catch (const Json::exception&) {
            throw Error(ErrorCode::Config, name(key) + " has the wrong type");
        }
    }

    template <class T>
    void get(const char* key, std::optional<T>& out) {
        if (!j_.contains(key)) return;
        T v{};
        get(key, v);
        out = v;
    }

    void path(const char* key, std::filesystem::path& out) {
        std::string s;
        if (!j_.contains(key)) return;
        get(key, s);
        out = resolve(s);
    }
    void path(const char* key, std::optional<std::filesystem::path>& out) {
        if (!j_.contains(key)) return;
        std::filesystem::path p;
        path(key, p);
        out = p;
    }
    void time(const char* key, std::optional<Timestamp>& out) {
        if (!j_.contains(key)) return;
        std::string s;
        get(key, s);
        try {
            out = parse_timestamp(s);
        } catch (const Error&) {
            throw Error(ErrorCode::Config, name(key) + ": bad timestamp '" + s + "'");
        }
    }

    const Json* sub(const char* key) { return take(key); }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw Error(ErrorCode::Config, "unknown configuration key " + name(k.c_str()));
    }

private:
    const Json* take(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    std::string name(const char* key) const { return where_.empty() ? key : where_ + "." + key; }
    std::filesystem::path resolve(const std::string& s) const {
        std::filesystem::path p(s);
        return p.is_absolute() ? p : (base_ / p).lexically_normal();
    }

    const Json& j_;
    std::string where_;
    const std::filesystem::path& base_;
    std::set<std::string> seen_;
};

} // namespace detail

inline RunConfig config_from_json(const Json& j, const std::filesystem::path& base_dir) {
    RunConfig c;
    c.base_dir = base_dir;
    c.raw = j;
    detail::Reader r(j, "", base_dir);
    r.path("work_dir", c.work_dir);
    if (!c.work_dir.is_absolute()) c.work_dir = (base_dir / c.work_dir).lexically_normal();
    r.path("cache_dir", c.cache_dir);
    if (!c.cache_dir.is_absolute()) c.cache_dir = (base_dir / c.cache_dir).lexically_normal();
    r.path("patterns", c.patterns);
    r.path("languages", c.languages);
    r.path("lexicon", c.lexicon);
    r.path("priority_terms", c.priority_terms);
    r.path("satd_predictions", c.satd_predictions);
    r.path("sentiment_predictions", c.sentiment_predictions);
    std::string heuristic;
    r.get("heuristic", heuristic);
    if (!heuristic.empty()) c.heuristic = priority::parse_heuristic(heuristic);
    r.get("offline", c.offline);
    r.get("include_review_comments", c.include_review_comments);
    r.get("reverse_issue_refs", c.reverse_issue_refs);
    r.get("max_chain_length", c.max_chain_length);
    r.get("bins", c.bins);
    r.get("min_tokens", c.min_tokens);
    r.get("sonar_window", c.sonar_window);
    r.get("top_k", c.top_k);
    r.get("concurrency", c.concurrency);
    r.get("api_base", c.api_base);
    r.path("token_file", c.token_file);

    if (const Json* s = r.sub("selection")) {
        detail::Reader sr(*s, "selection", base_dir);
        sr.get("min_commits", c.selection.min_commits);
        sr.get("min_contributors", c.selection.min_contributors);
        sr.get("min_stars", c.selection.min_stars);
        sr.get("min_age_years", c.selection.min_age_years);
        sr.get("activity_window_months", c.selection.activity_window_months);
        sr.time("as_of", c.selection.as_of);
        sr.finish();
    }
    if (const Json* p = r.sub("provider")) {
        detail::Reader pr(*p, "provider", base_dir);
        pr.get("command", c.provider.command);
        pr.path("vectors", c.provider.vectors);
        pr.finish();
    }
    if (const Json* repos = r.sub("repos")) {
        if (!repos->is_array()) throw Error(ErrorCode::Config, "repos must be an array of tables");
        for (std::size_t i = 0; i < repos->size(); ++i) {
            detail::Reader rr((*repos)[i], "repos[" + std::to_string(i) + "]", base_dir);
            RepoConfig rc;
            rr.get("host", rc.ref.host);
            if (rc.ref.host.empty()) rc.ref.host = "github.com";
            rr.get("owner", rc.ref.owner);
            rr.get("name", rc.ref.name);
            if (rc.ref.owner.empty() || rc.ref.name.empty())
                throw Error(ErrorCode::Config, "repos[" + std::to_string(i) + "] needs owner and name");
            rr.path("clone", rc.ref.clone_path);
            rr.path("sonar", rc.sonar);
            rr.get("commits", rc.commits);
            rr.get("contributors", rc.contributors);
            rr.get("stars", rc.stars);
            rr.time("created_at", rc.created_at);
            rr.time("last_activity", rc.last_activity);
            rr.finish();
            c.repos.push_back(std::move(rc));
        }
    }
    r.finish();

    std::set<std::string> ids;
    for (const auto& rc : c.repos)
        if (!ids.insert(rc.ref.identifier()).second)
            throw Error(ErrorCode::Config, "repository listed twice: " + rc.ref.identifier());
    if (c.max_chain_length < 1 || c.max_chain_length > 4) throw Error(ErrorCode::Config, "max_chain_length must be 1..4");
    if (c.bins == 0) throw Error(ErrorCode::Config, "bins must be positive");
    if (c.concurrency == 0) throw Error(ErrorCode::Config, "concurrency must be positive");
    return c;
}

/// Every path the configuration names must exist.
inline void validate_paths(const RunConfig& c) {
    auto need = [](const std::optional<std::filesystem::path>& p, const std::string& what) {
        if (p && !std::filesystem::exists(*p)) throw Error(ErrorCode::Config, what + " not found: " + p->string());
    };
    need(c.patterns, "patterns file");
    need(c.languages, "language table");
    need(c.lexicon, "lexicon file");
    need(c.priority_terms, "priority term file");
    need(c.satd_predictions, "SATD predictions file");
    need(c.sentiment_predictions, "sentiment predictions file");
    need(c.provider.vectors, "vector file");
    need(c.token_file, "token file");
    for (const auto& r : c.repos) {
        if (!r.ref.clone_path.empty()) need(r.ref.clone_path, "clone of " + r.ref.identifier());
        need(r.sonar, "Sonar export for " + r.ref.identifier());
    }
}

inline RunConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
    if (!std::filesystem::is_regular_file(path)) throw Error(ErrorCode::Config, "config file not found: " + path.string());
    Json j = parse_config_text(read_file(path), path);
    for (const auto& [k, v] : overrides) apply_override(j, k, v);
    auto c = config_from_json(j, std::filesystem::absolute(path).parent_path());
    validate_paths(c);
    return c;
}

} // namespace satd::config
