#pragma once

#include "satd_atlas/core_model.hpp"
#include "satd_atlas/forge_model.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace satd::forge {

// ---------------------------------------------------------------------------
// Auth

struct ForgeAuth {
    std::string token;
    std::size_t requests_per_window = 5000;

    /// Token from a file when given, else from GITHUB_TOKEN. May be empty.
    static ForgeAuth from_environment(const std::optional<std::filesystem::path>& token_file = std::nullopt) {
        ForgeAuth a;
        if (token_file) {
            a.token = read_file(*token_file);
            while (!a.token.empty() && is_space(a.token.back())) a.token.pop_back();
        } else if (const char* t = std::getenv("GITHUB_TOKEN")) {
            a.token = t;
        }
        return a;
    }
};

// ---------------------------------------------------------------------------
// Transport

struct HttpResponse {
    int status = 0;  // 0 = no response (connection failure)
    std::string body;
    std::map<std::string, std::string> headers;  // lowercase names

    std::optional<std::string> header(const std::string& name) const {
        auto it = headers.find(name);
        if (it == headers.end()) return std::nullopt;
        return it->second;
    }
};

class Transport {
public:
    virtual ~Transport() = default;
    /// `target` is a path plus query relative to the API base. Must be safe
    /// to call from several threads.
    virtual HttpResponse get(const std::string& target, const std::map<std::string, std::string>& headers) = 0;
    virtual const std::string& base_url() const = 0;
};

class HttplibTransport : public Transport {
public:
    explicit HttplibTransport(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(30))
        : base_(std::move(base_url)), timeout_(timeout) {
        while (!base_.empty() && base_.back() == '/') base_.pop_back();
        auto scheme_end = base_.find("://");
        if (scheme_end == std::string::npos) throw Error(ErrorCode::Config, "API base URL needs a scheme: " + base_);
        auto path_start = base_.find('/', scheme_end + 3);
        origin_ = base_.substr(0, path_start);
        prefix_ = path_start == std::string::npos ? "" : base_.substr(path_start);
    }

    HttpResponse get(const std::string& target, const std::map<std::string, std::string>& headers) override {
        httplib::Client cli(origin_);
        cli.set_connection_timeout(timeout_);
        cli.set_read_timeout(timeout_);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = cli.Get(prefix_ + target, h);
        HttpResponse out;
        if (!res) return out;
        out.status = res->status;
        out.body = res->body;
        for (const auto& [k, v] : res->headers) out.headers[to_lower_ascii(k)] = v;
        return out;
    }

    const std::string& base_url() const override { return base_; }

private:
    std::string base_;
    std::string origin_;
    std::string prefix_;
    std::chrono::seconds timeout_;
};

/// Target of the rel="next" entry of a Link header, made relative to `base`.
inline std::optional<std::string> next_link(const std::string& link_header, const std::string& base) {
    static const std::regex entry(R"re(<([^>]*)>\s*;\s*rel="?next"?)re");
    std::smatch m;
    if (!std::regex_search(link_header, m, entry)) return std::nullopt;
    std::string url = m[1];
    if (url.rfind(base, 0) == 0) return url.substr(base.size());
    if (!url.empty() && url.front() == '/') return url;
    throw Error(ErrorCode::SchemaMismatch, "pagination link outside the API base: " + url);
}

// ---------------------------------------------------------------------------
// Retry

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct RetryPolicy {
    std::size_t max_attempts = 8;
    std::chrono::milliseconds base{1000};
    std::chrono::milliseconds ceiling{64000};
};

/// Exponential backoff with equal jitter, `u` in [0, 1). A server
/// retry-after value wins over the computed delay.
inline std::chrono::milliseconds backoff_delay(const RetryPolicy& p, std::size_t attempt,
                                               std::optional<std::chrono::seconds> retry_after, double u) {
    if (retry_after) return std::chrono::duration_cast<std::chrono::milliseconds>(*retry_after);
    double exp = static_cast<double>(p.base.count()) * std::pow(2.0, static_cast<double>(std::min<std::size_t>(attempt, 30)));
    exp = std::min(exp, static_cast<double>(p.ceiling.count()));
    return std::chrono::milliseconds(static_cast<std::int64_t>(exp / 2.0 + u * exp / 2.0));
}

inline bool is_rate_limited(const HttpResponse& r) {
    if (r.status == 429) return true;
    if (r.status != 403) return false;
    return r.header("retry-after") || r.header("x-ratelimit-remaining") == std::optional<std::string>("0");
}

inline std::optional<std::chrono::seconds> retry_after(const HttpResponse& r) {
    auto h = r.header("retry-after");
    if (!h) return std::nullopt;
    try {
        return std::chrono::seconds(std::stoll(*h));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// API client

struct ClientOptions {
    RetryPolicy retry;
    Sleeper sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    std::uint64_t jitter_seed = 0x5eed;
    std::function<void(const std::string&)> log;
};

struct Page {
    Json items = Json::array();
    std::optional<std::string> etag;
    bool not_modified = false;
};

class ApiClient {
public:
    ApiClient(Transport& transport, ForgeAuth auth, ClientOptions opts = {})
        : transport_(transport), auth_(std::move(auth)), opts_(std::move(opts)), rng_(opts_.jitter_seed) {}

    /// One request with retries. Throws AuthFailure, NotFound, RateLimited,
    /// or PartialSync once retries are exhausted.
    HttpResponse request(const std::string& target, const std::optional<std::string>& etag = std::nullopt) {
        std::map<std::string, std::string> headers{{"Accept", "application/vnd.github+json"},
                                                   {"User-Agent", "satd-atlas"},
                                                   {"X-GitHub-Api-Version", "2022-11-28"}};
        if (!auth_.token.empty()) headers["Authorization"] = "Bearer " + auth_.token;
        if (etag) headers["If-None-Match"] = *etag;
        for (std::size_t attempt = 0; attempt < opts_.retry.max_attempts; ++attempt) {
            if (requests_.fetch_add(1) >= auth_.requests_per_window)
                throw Error(ErrorCode::RateLimited, "request budget of " + std::to_string(auth_.requests_per_window) +
                                                        " exhausted");
            auto r = transport_.get(target, headers);
            if ((r.status >= 200 && r.status < 300) || r.status == 304) return r;
            if (r.status == 404) throw Error(ErrorCode::NotFound, "not found: " + target);
            const bool limited = is_rate_limited(r);
            if (!limited && (r.status == 401 || r.status == 403))
                throw Error(ErrorCode::AuthFailure, "forge rejected credentials (HTTP " + std::to_string(r.status) + ")");
            if (!limited && r.status != 0 && r.status < 500)
                throw Error(ErrorCode::SchemaMismatch, "unexpected HTTP " + std::to_string(r.status) + " for " + target);
            const auto wait_hint = retry_after(r);
            if (attempt + 1 == opts_.retry.max_attempts) {
                if (limited)
                    throw Error(ErrorCode::RateLimited,
                                "still rate limited on " + target +
                                    (wait_hint ? "; retry after " + std::to_string(wait_hint->count()) + " s" : ""));
                break;
            }
            auto delay = backoff_delay(opts_.retry, attempt, wait_hint, jitter());
            log((limited ? "rate limited on " : "retrying ") + target + ", waiting " + std::to_string(delay.count()) +
                " ms");
            opts_.sleep(delay);
        }
        throw Error(ErrorCode::PartialSync, "giving up on " + target);
    }

    Json get_json(const std::string& target) {
        auto r = request(target);
        return parse(r, target);
    }

    /// Follows rel="next" links. When `etag` matches the first page the
    /// result is marked not_modified and holds no items.
    Page get_pages(const std::string& first, const std::optional<std::string>& etag = std::nullopt,
                   const std::function<bool(const Json&)>& keep_going = {}) {
        Page out;
        std::optional<std::string> target = first;
        bool first_page = true;
        while (target) {
            auto r = request(*target, first_page ? etag : std::nullopt);
            if (first_page) {
                if (r.status == 304) {
                    out.not_modified = true;
                    out.etag = etag;
                    return out;
                }
                out.etag = r.header("etag");
            }
            auto page = parse(r, *target);
            if (!page.is_array()) throw Error(ErrorCode::SchemaMismatch, *target + " did not return a list");
            for (auto& item : page) out.items.push_back(std::move(item));
            if (keep_going && !keep_going(page)) break;
            auto link = r.header("link");
            target = link ? next_link(*link, transport_.base_url()) : std::nullopt;
            first_page = false;
        }
        return out;
    }

    std::size_t requests_made() const { return requests_.load(); }

private:
    static Json parse(const HttpResponse& r, const std::string& target) {
        try {
            return Json::parse(r.body);
        } catch (const Json::parse_error&) {
            throw Error(ErrorCode::SchemaMismatch, "malformed JSON from " + target);
        }
    }

    double jitter() {
        std::lock_guard lock(mu_);
        return std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    }

    void log(const std::string& msg) {
        if (opts_.log) opts_.log(msg);
    }

    Transport& transport_;
    ForgeAuth auth_;
    ClientOptions opts_;
    std::mutex mu_;
    std::mt19937_64 rng_;
    std::atomic<std::size_t> requests_{0};
};

// ---------------------------------------------------------------------------
// Records from API payloads

struct RawComment {
    std::string body;
    std::string author;
    Timestamp created_at{};
};

namespace detail {

inline std::string str(const Json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() || it->is_null() ? std::string() : it->get<std::string>();
}

inline std::string login(const Json& j) {
    auto it = j.find("user");
    return it == j.end() || it->is_null() ? std::string() : str(*it, "login");
}

inline Timestamp time_of(const Json& j, const char* key) {
    auto s = str(j, key);
    if (s.empty()) throw Error(ErrorCode::SchemaMismatch, std::string("missing timestamp '") + key + "'");
    return parse_timestamp(s);
}

inline bool is_hex_sha(const std::string& s) {
    return s.size() == 40 && std::all_of(s.begin(), s.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

} // namespace detail

/// Issue numbers the forge would close when the text is merged
/// ("fixes #12", "Closes: #3", ...).
inline std::vector<std::uint64_t> closing_references(const std::string& text) {
    static const std::regex re(R"((?:^|[^\w])(?:close[sd]?|fix(?:e[sd])?|resolve[sd]?)\s*:?\s+#(\d+)\b)",
                               std::regex::icase);
    std::vector<std::uint64_t> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        auto n = std::stoull((*it)[1]);
        if (n > 0 && std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
    }
    return out;
}

inline Artifact commit_from_api(const RepoRef& repo, const Json& j) {
    auto sha = detail::str(j, "sha");
    if (!detail::is_hex_sha(sha)) throw Error(ErrorCode::SchemaMismatch, "malformed commit sha '" + sha + "'");
    const Json& c = j.at("commit");
    auto a = make_artifact(commit_id(repo, sha), repo, ArtifactKind::Commit, sanitize_utf8(detail::str(c, "message")),
                           detail::time_of(c.at("committer"), "date"), detail::str(c.at("author"), "name"));
    a.commit_sha = sha;
    return a;
}

inline RawComment comment_from_api(const Json& j) {
    return {sanitize_utf8(detail::str(j, "body")), detail::login(j), detail::time_of(j, "created_at")};
}

/// Review comments grouped by thread (root first), threads in order of their root.
inline std::vector<RawComment> review_comments_in_thread_order(const Json& items) {
    struct Row {
        std::uint64_t root, id;
        Timestamp at;
        RawComment c;
    };
    std::vector<Row> rows;
    for (const auto& j : items) {
        auto id = j.at("id").get<std::uint64_t>();
        auto reply = j.find("in_reply_to_id");
        auto root = reply != j.end() && !reply->is_null() ? reply->get<std::uint64_t>() : id;
        auto c = comment_from_api(j);
        rows.push_back({root, id, c.created_at, std::move(c)});
    }
    std::map<std::uint64_t, Timestamp> root_time;
    for (const auto& r : rows) {
        auto [it, fresh] = root_time.emplace(r.root, r.at);
        if (!fresh) it->second = std::min(it->second, r.at);
    }
    std::sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) {
        return std::tie(root_time[a.root], a.root, a.at, a.id) < std::tie(root_time[b.root], b.root, b.at, b.id);
    });
    std::vector<RawComment> out;
    for (auto& r : rows) out.push_back(std::move(r.c));
    return out;
}

/// Title section when the title is non-empty, Description when the body is
/// non-empty, then one DiscussionComment per comment in the given order.
inline std::vector<Artifact> decompose_sections(const Artifact& main, std::uint64_t number, const std::string& title,
                                                const std::string& body, const std::vector<RawComment>& discussion) {
    if (main.kind != ArtifactKind::PullRequest && main.kind != ArtifactKind::Issue)
        throw Error(ErrorCode::SchemaMismatch, "sections need a PullRequest or Issue, got " +
                                                   std::string(to_string(main.kind)));
    const auto kind = main.kind == ArtifactKind::PullRequest ? ArtifactKind::PRSection : ArtifactKind::IssueSection;
    std::vector<Artifact> out;
    auto add = [&](SectionRole role, const std::string& text, Timestamp at, const std::string& author) {
        auto a = make_artifact(section_id(main.repo, main.kind, number, role), main.repo, kind, text, at, author);
        a.parent_id = main.id;
        a.role = role;
        out.push_back(std::move(a));
    };
    if (!title.empty()) add(SectionRole::title(), title, main.created_at, main.author);
    if (!body.empty()) add(SectionRole::description(), body, main.created_at, main.author);
    for (std::size_t i = 0; i < discussion.size(); ++i)
        add(SectionRole::discussion(i), discussion[i].body, discussion[i].created_at, discussion[i].author);
    return out;
}

// ---------------------------------------------------------------------------
// Cache

struct EndpointState {
    std::optional<std::string> etag;
    std::optional<Timestamp> last_sync;
    bool complete = true;
};

struct CacheManifest {
    RepoRef repo;
    std::map<std::string, std::size_t> counts;  // commits, pulls, issues, sections
    std::optional<Timestamp> last_sync;
    std::map<std::string, EndpointState> endpoints;

    std::vector<std::string> incomplete() const {
        std::vector<std::string> out;
        for (const auto& [name, e] : endpoints)
            if (!e.complete) out.push_back(name);
        return out;
    }
};

inline Json to_json(const CacheManifest& m) {
    Json endpoints = Json::object();
    for (const auto& [name, e] : m.endpoints)
        endpoints[name] = Json{{"etag", e.etag ? Json(*e.etag) : Json(nullptr)},
                               {"last_sync", e.last_sync ? Json(format_timestamp(*e.last_sync)) : Json(nullptr)},
                               {"complete", e.complete}};
    return Json{{"repo", repo_to_json(m.repo)},
                {"counts", m.counts},
                {"last_sync", m.last_sync ? Json(format_timestamp(*m.last_sync)) : Json(nullptr)},
                {"endpoints", endpoints},
                {"incomplete_endpoints", m.incomplete()}};
}

inline CacheManifest manifest_from_json(const Json& j) {
    CacheManifest m;
    m.repo = repo_from_json(j.at("repo"));
    m.counts = j.value("counts", std::map<std::string, std::size_t>{});
    if (auto s = detail::str(j, "last_sync"); !s.empty()) m.last_sync = parse_timestamp(s);
    const Json endpoints = j.value("endpoints", Json::object());
    for (const auto& [name, e] : endpoints.items()) {
        EndpointState st;
        if (auto s = detail::str(e, "etag"); !s.empty()) st.etag = s;
        if (auto s = detail::str(e, "last_sync"); !s.empty()) st.last_sync = parse_timestamp(s);
        st.complete = e.value("complete", true);
        m.endpoints[name] = st;
    }
    return m;
}

/// Cache contents keyed by artifact id.
struct ForgeCache {
    CacheManifest manifest;
    std::map<std::string, Artifact> commits;
    std::map<std::string, PullRequestRecord> pulls;
    std::map<std::string, IssueRecord> issues;
    std::map<std::string, Artifact> sections;

    /// Replaces the record and all of its sections.
    void put(PullRequestRecord pr, std::vector<Artifact> secs) {
        drop_sections(pr.artifact.id);
        for (auto& s : secs) sections[s.id] = std::move(s);
        pulls[pr.artifact.id] = std::move(pr);
    }
    void put(IssueRecord issue, std::vector<Artifact> secs) {
        drop_sections(issue.artifact.id);
        for (auto& s : secs) sections[s.id] = std::move(s);
        issues[issue.artifact.id] = std::move(issue);
    }

    std::vector<Artifact> artifacts() const {
        std::vector<Artifact> out;
        for (const auto& [id, a] : commits) out.push_back(a);
        for (const auto& [id, p] : pulls) out.push_back(p.artifact);
        for (const auto& [id, i] : issues) out.push_back(i.artifact);
        for (const auto& [id, s] : sections) out.push_back(s);
        return out;
    }

private:
    void drop_sections(const std::string& parent) {
        std::erase_if(sections, [&](const auto& kv) { return kv.second.parent_id == parent; });
    }
};

inline std::string repo_slug(const RepoRef& repo) { return repo.owner + "__" + repo.name; }

inline std::filesystem::path cache_dir_for(const std::filesystem::path& cache_root, const RepoRef& repo) {
    return cache_root / repo_slug(repo);
}

inline bool cache_exists(const std::filesystem::path& cache_root, const RepoRef& repo) {
    return std::filesystem::exists(cache_dir_for(cache_root, repo) / "manifest.json");
}

inline ForgeCache load_cache(const std::filesystem::path& cache_root, const RepoRef& repo) {
    ForgeCache c;
    c.manifest.repo = repo;
    const auto dir = cache_dir_for(cache_root, repo);
    if (!std::filesystem::exists(dir / "manifest.json")) return c;
    try {
        c.manifest = manifest_from_json(Json::parse(read_file(dir / "manifest.json")));
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::MalformedLine, (dir / "manifest.json").string() + ": " + e.what());
    }
    auto opt = [&](const char* f) { return std::filesystem::exists(dir / f); };
    if (opt("commits.jsonl"))
        for (auto& a : read_artifacts(dir / "commits.jsonl")) c.commits[a.id] = std::move(a);
    if (opt("pulls.jsonl"))
        for (auto& p : read_pull_requests(dir / "pulls.jsonl")) c.pulls[p.artifact.id] = std::move(p);
    if (opt("issues.jsonl"))
        for (auto& i : read_issues(dir / "issues.jsonl")) c.issues[i.artifact.id] = std::move(i);
    if (opt("sections.jsonl"))
        for (auto& s : read_artifacts(dir / "sections.jsonl")) c.sections[s.id] = std::move(s);
    for (const auto& [id, s] : c.sections)
        if (!s.parent_id || (!c.pulls.count(*s.parent_id) && !c.issues.count(*s.parent_id)))
            throw Error(ErrorCode::DanglingReference, "cached section " + id + " has no parent in the cache");
    return c;
}

inline void save_cache(const std::filesystem::path& cache_root, ForgeCache& c) {
    const auto dir = cache_dir_for(cache_root, c.manifest.repo);
    auto values = [](const auto& m) {
        std::vector<std::reference_wrapper<const typename std::decay_t<decltype(m)>::mapped_type>> v;
        for (const auto& [k, x] : m) v.push_back(std::cref(x));
        return v;
    };
    auto j = [](const auto& x) { return to_json(x.get()); };
    write_jsonl(dir / "commits.jsonl", values(c.commits), j);
    write_jsonl(dir / "pulls.jsonl", values(c.pulls), j);
    write_jsonl(dir / "issues.jsonl", values(c.issues), j);
    write_jsonl(dir / "sections.jsonl", values(c.sections), j);
    c.manifest.counts = {{"commits", c.commits.size()},
                         {"pulls", c.pulls.size()},
                         {"issues", c.issues.size()},
                         {"sections", c.sections.size()}};
    write_file_atomic(dir / "manifest.json", [&](std::ostream& out) { out << to_json(c.manifest).dump(2) << '\n'; });
}

// ---------------------------------------------------------------------------
// Sync

enum class SyncKind { Commit, PullRequest, Issue };

struct SyncOptions {
    std::size_t per_page = 100;
    std::size_t concurrency = 4;
    std::function<Timestamp()> now = [] { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); };
    std::function<void(const std::string&)> log;
};

struct SyncResult {
    CacheManifest manifest;
    std::size_t new_records = 0;
    std::size_t updated_records = 0;
};

namespace detail {

/// Runs `fn(i)` for i in [0, n) on at most `k` threads; the first failure
/// is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, std::size_t k, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < std::max<std::size_t>(1, std::min(k, n)); ++t) threads.emplace_back(worker);
    threads.clear();
    if (failure) std::rethrow_exception(failure);
}

} // namespace detail

/// Fetches the requested kinds into the cache under `cache_root`. Pull
/// requests and issues are refetched in detail only when new or updated.
/// Endpoints that fail midway are marked incomplete, whatever was fetched is
/// kept, and PartialSync is thrown.
inline SyncResult sync(const RepoRef& repo, const std::set<SyncKind>& kinds, ApiClient& api,
                       const std::filesystem::path& cache_root, const SyncOptions& opts = {}) {
    const std::string base = "/repos/" + repo.owner + "/" + repo.name;
    api.get_json(base);  // NotFound before anything is written

    auto cache = load_cache(cache_root, repo);
    cache.manifest.repo = repo;
    const auto started = opts.now();
    const std::string pp = "per_page=" + std::to_string(opts.per_page);
    SyncResult result;
    std::vector<std::string> failures;
    auto log = [&](const std::string& m) {
        if (opts.log) opts.log(m);
    };

    auto run_endpoint = [&](const std::string& name, auto&& body) {
        auto& state = cache.manifest.endpoints[name];
        try {
            body(state);
            state.complete = true;
            state.last_sync = started;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::PartialSync) throw;
            state.complete = false;
            failures.push_back(name);
            log(name + ": " + e.what());
        }
    };

    if (kinds.count(SyncKind::Commit)) {
        run_endpoint("commits", [&](EndpointState& st) {
            auto page = api.get_pages(base + "/commits?" + pp, st.complete ? st.etag : std::nullopt);
            if (page.not_modified) return;
            for (const auto& j : page.items) {
                auto a = commit_from_api(repo, j);
                auto it = cache.commits.find(a.id);
                if (it == cache.commits.end()) ++result.new_records;
                cache.commits[a.id] = std::move(a);
            }
            st.etag = page.etag;
        });
    }

    if (kinds.count(SyncKind::PullRequest)) {
        run_endpoint("pulls", [&](EndpointState& st) {
            const auto since = st.complete ? st.last_sync : std::nullopt;
            auto older_than_since = [&](const Json& item) {
                return since && detail::time_of(item, "updated_at") < *since;
            };
            auto page = api.get_pages(base + "/pulls?state=all&sort=updated&direction=desc&" + pp,
                                      st.complete ? st.etag : std::nullopt, [&](const Json& items) {
                                          return std::none_of(items.begin(), items.end(), older_than_since);
                                      });
            if (page.not_modified) return;
            std::vector<Json> todo;
            for (const auto& item : page.items) {
                auto id = pull_request_id(repo, item.at("number").get<std::uint64_t>());
                auto it = cache.pulls.find(id);
                if (it != cache.pulls.end() && it->second.updated_at == detail::time_of(item, "updated_at")) continue;
                todo.push_back(item);
            }
            std::vector<std::pair<PullRequestRecord, std::vector<Artifact>>> fetched(todo.size());
            detail::parallel_for(todo.size(), opts.concurrency, [&](std::size_t i) {
                const Json& j = todo[i];
                const auto n = j.at("number").get<std::uint64_t>();
                const auto num = std::to_string(n);
                PullRequestRecord r;
                r.number = n;
                r.title = sanitize_utf8(detail::str(j, "title"));
                r.body = sanitize_utf8(detail::str(j, "body"));
                r.state = detail::str(j, "state");
                r.updated_at = detail::time_of(j, "updated_at");
                r.artifact = make_artifact(pull_request_id(repo, n), repo, ArtifactKind::PullRequest,
                                           join_title_body(r.title, r.body), detail::time_of(j, "created_at"),
                                           detail::login(j));
                if (!detail::str(j, "merged_at").empty()) {
                    auto sha = detail::str(j, "merge_commit_sha");
                    if (detail::is_hex_sha(sha)) r.merge_sha = sha;
                }
                for (const auto& c : api.get_pages(base + "/pulls/" + num + "/commits?" + pp).items)
                    r.commit_shas.push_back(detail::str(c, "sha"));
                r.linked_issues = closing_references(r.body);
                std::vector<RawComment> discussion;
                for (const auto& c : api.get_pages(base + "/issues/" + num + "/comments?" + pp).items)
                    discussion.push_back(comment_from_api(c));
                auto review = review_comments_in_thread_order(api.get_pages(base + "/pulls/" + num + "/comments?" + pp).items);
                r.discussion_count = discussion.size();
                r.review_count = review.size();
                discussion.insert(discussion.end(), review.begin(), review.end());
                auto secs = decompose_sections(r.artifact, n, r.title, r.body, discussion);
                fetched[i] = {std::move(r), std::move(secs)};
            });
            for (auto& [r, secs] : fetched) {
                (cache.pulls.count(r.artifact.id) ? result.updated_records : result.new_records) += 1;
                cache.put(std::move(r), std::move(secs));
            }
            st.etag = page.etag;
        });
    }

    if (kinds.count(SyncKind::Issue)) {
        run_endpoint("issues", [&](EndpointState& st) {
            std::string target = base + "/issues?state=all&" + pp;
            if (st.complete && st.last_sync) target += "&since=" + format_timestamp(*st.last_sync);
            auto page = api.get_pages(target, st.complete ? st.etag : std::nullopt);
            if (page.not_modified) return;
            std::vector<Json> todo;
            for (const auto& item : page.items) {
                if (item.contains("pull_request")) continue;  // the forge lists PRs as issues too
                const auto n = item.at("number").get<std::uint64_t>();
                if (cache.pulls.count(pull_request_id(repo, n))) continue;
                auto it = cache.issues.find(issue_id(repo, n));
                if (it != cache.issues.end() && it->second.updated_at == detail::time_of(item, "updated_at")) continue;
                todo.push_back(item);
            }
            std::vector<std::pair<IssueRecord, std::vector<Artifact>>> fetched(todo.size());
            detail::parallel_for(todo.size(), opts.concurrency, [&](std::size_t i) {
                const Json& j = todo[i];
                const auto n = j.at("number").get<std::uint64_t>();
                IssueRecord r;
                r.number = n;
                r.title = sanitize_utf8(detail::str(j, "title"));
                r.body = sanitize_utf8(detail::str(j, "body"));
                r.state = detail::str(j, "state");
                r.updated_at = detail::time_of(j, "updated_at");
                r.artifact = make_artifact(issue_id(repo, n), repo, ArtifactKind::Issue, join_title_body(r.title, r.body),
                                           detail::time_of(j, "created_at"), detail::login(j));
                std::vector<RawComment> discussion;
                if (j.value("comments", 1) > 0)
                    for (const auto& c : api.get_pages(base + "/issues/" + std::to_string(n) + "/comments?" + pp).items)
                        discussion.push_back(comment_from_api(c));
                r.discussion_count = discussion.size();
                auto secs = decompose_sections(r.artifact, n, r.title, r.body, discussion);
                fetched[i] = {std::move(r), std::move(secs)};
            });
            for (auto& [r, secs] : fetched) {
                (cache.issues.count(r.artifact.id) ? result.updated_records : result.new_records) += 1;
                cache.put(std::move(r), std::move(secs));
            }
            st.etag = page.etag;
        });
    }

    cache.manifest.last_sync = started;
    save_cache(cache_root, cache);
    result.manifest = cache.manifest;
    if (!failures.empty()) {
        std::string names;
        for (const auto& f : failures) names += (names.empty() ? "" : ", ") + f;
        throw Error(ErrorCode::PartialSync, "incomplete endpoints: " + names);
    }
    return result;
}

} // namespace satd::forge
