#pragma once

// Stage orchestration over a shared work directory. Every stage reads the
// files written by earlier stages and writes its own; nothing else is
// carried between stages.

#include "satd_atlas/analytics_report.hpp"
#include "satd_atlas/comment_extract.hpp"
#include "satd_atlas/comment_lifecycle.hpp"
#include "satd_atlas/config.hpp"
#include "satd_atlas/detect.hpp"
#include "satd_atlas/forge_ingest.hpp"
#include "satd_atlas/git.hpp"
#include "satd_atlas/linkage.hpp"
#include "satd_atlas/priority.hpp"
#include "satd_atlas/propagation.hpp"

#include <openssl/evp.h>

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#ifndef SATD_ATLAS_VERSION
#define SATD_ATLAS_VERSION "0.0.0"
#endif

namespace satd::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = SATD_ATLAS_VERSION;
inline constexpr int kSchemaVersion = 1;

inline const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names{"select", "extract", "ingest", "lifecycle", "link",  "detect",
                                                "sentiment", "score", "chains", "bins",  "ablate", "report"};
    return names;
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::Io, "SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

/// Exclusive per-work-dir lock holding the owner's pid. A lock left by a
/// process that no longer exists is taken over.
class WorkLock {
public:
    explicit WorkLock(const fs::path& dir) : path_(dir / ".lock") {
        fs::create_directories(dir);
        for (int attempt = 0; attempt < 2; ++attempt) {
            int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
            if (fd >= 0) {
                const auto pid = std::to_string(::getpid()) + "\n";
                [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
                ::close(fd);
                return;
            }
            if (errno != EEXIST) throw Error(ErrorCode::Io, "cannot create " + path_.string());
            long owner = 0;
            try {
                owner = std::stol(read_file(path_));
            } catch (...) {
            }
            if (owner > 0 && (::kill(static_cast<pid_t>(owner), 0) == 0 || errno == EPERM))
                throw Error(ErrorCode::Config, "work directory is in use by process " + std::to_string(owner));
            fs::remove(path_);
        }
        throw Error(ErrorCode::Io, "cannot acquire " + path_.string());
    }
    ~WorkLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    WorkLock(const WorkLock&) = delete;
    WorkLock& operator=(const WorkLock&) = delete;

private:
    fs::path path_;
};

struct RepoMetadata {
    std::optional<std::uint64_t> commits;
    std::optional<std::uint64_t> contributors;
    std::optional<std::uint64_t> stars;
    std::optional<Timestamp> created_at;
    std::optional<Timestamp> last_activity;
};

/// Start of the recent-activity window: `months` calendar months before
/// `as_of`, clamped to the end of shorter months.
inline Timestamp months_before(Timestamp as_of, std::uint32_t months) {
    using namespace std::chrono;
    const auto day = floor<days>(as_of);
    year_month_day ymd{day};
    auto ym = year_month{ymd.year(), ymd.month()} - std::chrono::months{months};
    auto last = year_month_day_last{ym.year(), month_day_last{ym.month()}}.day();
    year_month_day shifted{ym.year(), ym.month(), std::min(ymd.day(), last)};
    return sys_days{shifted} + (as_of - day);
}

/// Names the thresholds a repository misses; empty means selected.
inline std::vector<std::string> selection_failures(const RepoMetadata& m, const config::Selection& s, Timestamp as_of) {
    std::vector<std::string> out;
    auto need = [&](const auto& v, std::uint64_t min, const char* what) {
        if (!v) out.push_back(std::string(what) + " unknown");
        else if (*v < min) out.push_back(std::string(what) + "<" + std::to_string(min));
    };
    need(m.commits, s.min_commits, "commits");
    need(m.contributors, s.min_contributors, "contributors");
    need(m.stars, s.min_stars, "stars");
    if (!m.created_at) out.push_back("age unknown");
    else if (std::chrono::duration<double, std::ratio<86400>>(as_of - *m.created_at).count() / 365.25 < s.min_age_years)
        out.push_back("age<" + report::num(s.min_age_years, 1) + "y");
    if (!m.last_activity) out.push_back("activity unknown");
    else if (*m.last_activity < months_before(as_of, s.activity_window_months))
        out.push_back("inactive>" + std::to_string(s.activity_window_months) + "mo");
    return out;
}

struct Reject {
    std::string stage;
    std::string repo;
    std::string code;
    std::string message;
    std::optional<std::string> artifact_id;
    std::optional<std::size_t> line;
};

inline Json to_json(const Reject& r) {
    Json j{{"stage", r.stage}, {"repo", r.repo}, {"code", r.code}, {"message", r.message}};
    if (r.artifact_id) j["artifact_id"] = *r.artifact_id;
    if (r.line) j["line"] = *r.line;
    return j;
}

class Pipeline {
public:
    using Log = std::function<void(const std::string&)>;

    Pipeline(config::RunConfig cfg, Log log = {}, std::optional<fs::path> config_file = std::nullopt)
        : cfg_(std::move(cfg)), log_(std::move(log)), config_file_(std::move(config_file)) {}

    const config::RunConfig& config() const { return cfg_; }
    const std::vector<Reject>& rejects() const { return rejects_; }

    fs::path work() const { return cfg_.work_dir; }
    fs::path reports() const { return cfg_.work_dir / "reports"; }
    fs::path repo_dir(const RepoRef& r) const { return cfg_.work_dir / "repos" / forge::repo_slug(r); }

    void run(const std::string& stage) {
        static const std::map<std::string, void (Pipeline::*)()> table{
            {"select", &Pipeline::select},     {"extract", &Pipeline::extract}, {"ingest", &Pipeline::ingest},
            {"lifecycle", &Pipeline::lifecycle}, {"link", &Pipeline::link},     {"detect", &Pipeline::detect},
            {"sentiment", &Pipeline::sentiment}, {"score", &Pipeline::score},   {"chains", &Pipeline::chains},
            {"bins", &Pipeline::bins},         {"ablate", &Pipeline::ablate},   {"report", &Pipeline::report}};
        if (stage == "all") {
            for (const auto& s : stage_names()) run(s);
            return;
        }
        auto it = table.find(stage);
        if (it == table.end()) throw Error(ErrorCode::Config, "unknown stage '" + stage + "'");
        stage_ = stage;
        log("start");
        (this->*it->second)();
    }

    /// Writes work/rejects.jsonl, or removes a stale one when the run was clean.
    void write_rejects() const {
        const auto path = work() / "rejects.jsonl";
        if (rejects_.empty()) {
            std::error_code ec;
            fs::remove(path, ec);
            return;
        }
        write_jsonl(path, rejects_, [](const Reject& r) { return to_json(r); });
    }

    void add_reject(Reject r) { rejects_.push_back(std::move(r)); }

    // -----------------------------------------------------------------------
    // Stages

    void select() {
        const Timestamp as_of = cfg_.selection.as_of.value_or(
            std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
        report::CsvWriter w({"repo", "commits", "contributors", "stars", "age_years", "last_activity", "selected", "reasons"});
        Json chosen = Json::array();
        for (const auto& rc : cfg_.repos) {
            RepoMetadata m = metadata(rc);
            const auto failures = selection_failures(m, cfg_.selection, as_of);
            auto opt = [](const auto& v) { return v ? std::to_string(*v) : std::string(); };
            std::string reasons;
            for (const auto& f : failures) reasons += (reasons.empty() ? "" : ";") + f;
            const std::string age =
                m.created_at ? report::num(std::chrono::duration<double, std::ratio<86400>>(as_of - *m.created_at).count() / 365.25, 2)
                             : "";
            w.row({rc.ref.identifier(), opt(m.commits), opt(m.contributors), opt(m.stars), age,
                   m.last_activity ? format_timestamp(*m.last_activity) : "", failures.empty() ? "yes" : "no", reasons});
            if (failures.empty()) chosen.push_back(rc.ref.identifier());
        }
        report::write_text(work() / "selection.csv", w.str());
        write_file_atomic(work() / "selected.json", [&](std::ostream& o) { o << chosen.dump(2) << '\n'; });
        log(std::to_string(chosen.size()) + " of " + std::to_string(cfg_.repos.size()) + " repositories selected");
    }

    void extract() {
        const auto profiles = profile_table();
        for_each_repo([&](const config::RepoConfig& rc) {
            require_clone(rc);
            std::vector<extract::ExtractWarning> warnings;
            auto comments = extract::extract_tree(rc.ref.clone_path, rc.ref, profiles, &warnings);
            write_artifacts(repo_dir(rc.ref) / "comments.jsonl", comments);
            write_warnings(repo_dir(rc.ref) / "extract_warnings.jsonl", warnings);
            log(rc.ref.identifier() + ": " + std::to_string(comments.size()) + " comments at head");
        });
    }

    void ingest() {
        std::optional<forge::HttplibTransport> transport;
        std::optional<forge::ApiClient> api;
        for_each_repo([&](const config::RepoConfig& rc) {
            if (cfg_.offline) {
                if (!forge::cache_exists(cfg_.cache_dir, rc.ref))
                    throw Error(ErrorCode::NotFound, "no cached forge data for " + rc.ref.identifier() + " (offline)");
            } else {
                if (!api) {
                    transport.emplace(cfg_.api_base);
                    api.emplace(*transport, forge::ForgeAuth::from_environment(cfg_.token_file), client_options());
                }
                forge::SyncOptions so;
                so.concurrency = cfg_.concurrency;
                so.log = [&](const std::string& m) { log(m); };
                auto res = forge::sync(rc.ref, {forge::SyncKind::Commit, forge::SyncKind::PullRequest, forge::SyncKind::Issue},
                                       *api, cfg_.cache_dir, so);
                log(rc.ref.identifier() + ": " + std::to_string(res.new_records) + " new, " +
                    std::to_string(res.updated_records) + " updated forge records");
            }
            const auto cache = forge::load_cache(cfg_.cache_dir, rc.ref);
            for (const auto& ep : cache.manifest.incomplete())
                add_reject({stage_, rc.ref.identifier(), "PartialSync", "endpoint " + ep + " is incomplete in the cache", {}, {}});
            std::vector<PullRequestRecord> pulls;
            std::vector<IssueRecord> issues;
            std::vector<Artifact> arts;
            std::unordered_map<std::string, std::size_t> discussion;
            for (const auto& [id, c] : cache.commits) arts.push_back(c);
            for (const auto& [id, p] : cache.pulls) {
                pulls.push_back(p);
                arts.push_back(p.artifact);
                discussion[id] = p.discussion_count;
            }
            for (const auto& [id, i] : cache.issues) {
                issues.push_back(i);
                arts.push_back(i.artifact);
            }
            std::size_t dropped = 0;
            for (const auto& [id, s] : cache.sections) {
                if (!cfg_.include_review_comments && s.kind == ArtifactKind::PRSection && s.role &&
                    s.role->type == SectionRole::Type::DiscussionComment && s.parent_id &&
                    s.role->index >= discussion[*s.parent_id]) {
                    ++dropped;
                    continue;
                }
                arts.push_back(s);
            }
            const auto dir = repo_dir(rc.ref);
            write_jsonl(dir / "pulls.jsonl", pulls, [](const PullRequestRecord& r) { return satd::to_json(r); });
            write_jsonl(dir / "issues.jsonl", issues, [](const IssueRecord& r) { return satd::to_json(r); });
            write_artifacts(dir / "forge_artifacts.jsonl", arts);
            log(rc.ref.identifier() + ": " + std::to_string(pulls.size()) + " pull requests, " +
                std::to_string(issues.size()) + " issues" +
                (dropped ? ", " + std::to_string(dropped) + " review comments left out" : ""));
        });
    }

    void lifecycle() {
        const auto profiles = profile_table();
        for_each_repo([&](const config::RepoConfig& rc) {
            require_clone(rc);
            const auto dir = repo_dir(rc.ref);
            auto res = lifecycle::build_lifecycles(rc.ref, profiles);
            write_jsonl(dir / "lifecycles.jsonl", res.lifecycles,
                        [](const lifecycle::CommentLifecycle& l) { return lifecycle::to_json(l); });
            write_artifacts(dir / "history_comments.jsonl", res.comments);
            write_warnings(dir / "lifecycle_warnings.jsonl", res.warnings);

            git::Repository g(rc.ref.clone_path);
            std::vector<Artifact> commits;
            for (const auto& c : g.full_history()) {
                auto a = make_artifact(commit_id(rc.ref, c.sha), rc.ref, ArtifactKind::Commit, sanitize_utf8(c.message),
                                       c.committed_at, c.author_name);
                a.commit_sha = c.sha;
                commits.push_back(std::move(a));
            }
            std::sort(commits.begin(), commits.end(), [](const Artifact& a, const Artifact& b) { return a.id < b.id; });
            write_artifacts(dir / "commits.jsonl", commits);

            const auto scale = report::repo_scale(rc.ref, profiles);
            write_file_atomic(dir / "scale.json", [&](std::ostream& o) {
                o << Json{{"repo", rc.ref.identifier()},
                          {"source_lines", scale.source_lines},
                          {"contributors", scale.contributors}}
                         .dump(2)
                  << '\n';
            });
            log(rc.ref.identifier() + ": " + std::to_string(res.lifecycles.size()) + " comment lifecycles over " +
                std::to_string(commits.size()) + " commits");
        });
    }

    void link() {
        for_each_repo([&](const config::RepoConfig& rc) {
            const auto dir = repo_dir(rc.ref);
            linkage::LinkInputs in;
            in.repo = rc.ref;
            in.lifecycles = lifecycle::read_lifecycles(need(dir / "lifecycles.jsonl"));
            std::map<std::string, Artifact> arts;
            for (auto& a : read_artifacts(need(dir / "history_comments.jsonl"))) arts.emplace(a.id, std::move(a));
            for (auto& a : read_artifacts(need(dir / "commits.jsonl"))) arts.emplace(a.id, std::move(a));
            if (fs::exists(dir / "forge_artifacts.jsonl")) {
                // Commits already known from the clone keep their git form.
                for (auto& a : read_artifacts(dir / "forge_artifacts.jsonl")) arts.emplace(a.id, std::move(a));
                in.pull_requests = read_pull_requests(need(dir / "pulls.jsonl"));
                in.issues = read_issues(need(dir / "issues.jsonl"));
            } else {
                log(rc.ref.identifier() + ": no forge data, linking comments and commits only");
            }
            for (auto& [id, a] : arts) in.artifacts.push_back(std::move(a));
            const auto g = linkage::inherit_section_links(linkage::build_graph(in, {cfg_.reverse_issue_refs}));
            write_artifacts(dir / "artifacts.jsonl", in.artifacts);
            linkage::write_links(dir / "links.jsonl", g);
            write_jsonl(dir / "dangling.jsonl", g.dangling(),
                        [](const linkage::DanglingReference& d) { return linkage::to_json(d); });
            write_file_atomic(dir / "link_summary.json",
                              [&](std::ostream& o) { o << linkage::summary_json(g).dump(2) << '\n'; });
            log(rc.ref.identifier() + ": " + std::to_string(g.node_count()) + " nodes, " +
                std::to_string(g.edges().size()) + " links, " + std::to_string(g.dangling().size()) + " dangling");
        });
    }

    void detect() {
        const auto arts = all_artifacts();
        const detect::KeywordClassifier clf(cfg_.patterns ? detect::load_pattern_config(*cfg_.patterns)
                                                          : detect::default_pattern_config());
        std::vector<SatdLabel> labels;
        labels.reserve(arts.size());
        for (const auto& a : arts) labels.push_back(clf.classify(a.id, a.text));
        if (cfg_.satd_predictions) {
            auto imp = import_predictions(*cfg_.satd_predictions, detect::PredictionKind::Satd, arts);
            labels = detect::merge_labels(labels, imp.satd);
        }
        write_jsonl(work() / "satd_labels.jsonl", labels, [](const SatdLabel& l) { return satd::to_json(l); });
        const auto n = std::count_if(labels.begin(), labels.end(), [](const SatdLabel& l) { return l.is_satd; });
        log(std::to_string(n) + " of " + std::to_string(labels.size()) + " artifacts labelled SATD");
    }

    void sentiment() {
        const auto arts = all_artifacts();
        const auto lex = cfg_.lexicon ? detect::load_lexicon(*cfg_.lexicon) : detect::default_lexicon();
        std::vector<SentimentLabel> labels;
        labels.reserve(arts.size());
        for (const auto& a : arts) labels.push_back(detect::classify_sentiment_lexicon(a.text, lex, a.id));
        if (cfg_.sentiment_predictions) {
            auto imp = import_predictions(*cfg_.sentiment_predictions, detect::PredictionKind::Sentiment, arts);
            labels = detect::merge_labels(labels, imp.sentiment);
        }
        write_jsonl(work() / "sentiment_labels.jsonl", labels, [](const SentimentLabel& l) { return satd::to_json(l); });
        log(std::to_string(labels.size()) + " sentiment labels");
    }

    void score() {
        const auto arts = all_artifacts();
        const auto scores = heuristic_scores(arts, {cfg_.heuristic}).at(cfg_.heuristic);
        std::vector<priority::PriorityScore> out;
        for (std::size_t i = 0; i < arts.size(); ++i) out.push_back({arts[i].id, cfg_.heuristic, scores[i]});
        write_jsonl(work() / "priorities.jsonl", out, [](const priority::PriorityScore& s) { return priority::to_json(s); });
        log(std::to_string(out.size()) + " artifacts scored with " + std::string(priority::to_string(cfg_.heuristic)));
    }

    void chains() {
        const auto arts = all_artifacts();
        const auto folded = fold(arts);
        std::vector<linkage::NodeInfo> nodes;
        for (const auto& a : arts) nodes.push_back({a.id, a.kind, a.parent_id});
        std::vector<linkage::LinkEdge> edges;
        for (const auto& rc : selected())
            read_jsonl(need(repo_dir(rc.ref) / "links.jsonl"),
                       [&](const Json& j, std::size_t) { edges.push_back(linkage::link_edge_from_json(j)); });
        const auto g = linkage::graph_from_edges(RepoRef{}, nodes, edges);

        std::vector<Json> dump;
        const auto stats = propagation::chain_statistics(
            g, folded.labels, folded.priorities, cfg_.max_chain_length, [&](const std::vector<linkage::NodeIndex>& c, bool satd) {
                if (satd) dump.push_back(propagation::chain_to_json(g, c, true, folded.priorities));
            });
        write_jsonl(work() / "satd_chains.jsonl", dump, [](const Json& j) { return j; });
        report::write_text(reports() / "chain_lengths.csv", propagation::chain_lengths_csv(stats));
        report::write_text(reports() / "depth_comment.csv",
                           propagation::depth_csv(propagation::directional_depth(g, folded.labels, ArtifactKind::Comment)));
        report::write_text(reports() / "depth_issue.csv",
                           propagation::depth_csv(propagation::directional_depth(g, folded.labels, ArtifactKind::Issue)));
        log(std::to_string(dump.size()) + " SATD-only chains");
    }

    void bins() {
        const auto arts = all_artifacts();
        const auto folded = fold(arts);
        const auto sentiments = sentiment_map();
        for (auto [kind, name] : {std::pair{ArtifactKind::Issue, "issue"}, std::pair{ArtifactKind::PullRequest, "pr"}}) {
            std::map<std::string, report::ArtifactFacts> facts;
            std::map<std::string, std::vector<double>> section_sentiment;
            std::map<std::string, std::size_t> section_tokens;
            for (const auto& a : arts) {
                if (main_kind(a.kind) != kind || a.kind == kind || !a.parent_id) continue;
                section_tokens[*a.parent_id] += a.token_count;
                if (auto it = sentiments.find(a.id); it != sentiments.end())
                    section_sentiment[*a.parent_id].push_back(it->second.score);
            }
            for (const auto& a : arts) {
                if (a.kind != kind) continue;
                report::ArtifactFacts f;
                auto st = section_tokens.find(a.id);
                f.tokens = st != section_tokens.end() ? st->second : a.token_count;
                f.is_satd = folded.labels.at(a.id);
                if (f.is_satd) f.priority = folded.priorities.at(a.id);
                if (auto ss = section_sentiment.find(a.id); ss != section_sentiment.end()) f.non_negative = stats::mean(ss->second);
                else if (auto it = sentiments.find(a.id); it != sentiments.end()) f.non_negative = it->second.score;
                facts[a.id] = f;
            }
            const auto path = reports() / (std::string("length_bins_") + name + ".csv");
            try {
                report::write_text(path, report::length_bins_csv(report::length_bin_report(facts, cfg_.bins, cfg_.min_tokens)));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::TooFewItems) throw;
                report::write_text(path, report::length_bins_csv({}));
                add_reject({stage_, "", "TooFewItems", std::string(name) + ": " + e.what(), {}, {}});
            }
        }
    }

    void ablate() {
        const auto arts = all_artifacts();
        const auto labels = satd_map();
        std::vector<Artifact> satd;
        for (const auto& a : arts)
            if (!is_main(a.kind) && labels.at(a.id).is_satd) satd.push_back(a);
        std::set<priority::Heuristic> which{priority::Heuristic::Lexical, priority::Heuristic::TfIdf};
        if (has_provider()) {
            which.insert(priority::Heuristic::EmbeddingCentroid);
            which.insert(priority::Heuristic::Hybrid);
        } else {
            log("no embedding provider; ablation covers Lexical and TfIdf only");
        }
        std::vector<priority::Agreement> rows;
        if (satd.size() >= 3) {
            const auto scores = heuristic_scores(satd, which, &arts);
            std::map<std::string, std::vector<std::string>> rankings;
            for (const auto& [h, vals] : scores) {
                std::vector<priority::PriorityScore> ps;
                for (std::size_t i = 0; i < satd.size(); ++i) ps.push_back({satd[i].id, h, vals[i]});
                rankings[std::string(priority::to_string(h))] = priority::rank(ps);
            }
            try {
                rows = priority::ablate(rankings, cfg_.top_k);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::DegenerateInput) throw;
                add_reject({stage_, "", "DegenerateInput", e.what(), {}, {}});
            }
        } else {
            add_reject({stage_, "", "InsufficientData", "fewer than 3 SATD artifacts to rank", {}, {}});
        }
        report::write_text(reports() / "ablation.csv", report::ablation_csv(rows));
    }

    void report() {
        const auto arts = all_artifacts();
        const auto labels = satd_map();
        const auto sentiments = sentiment_map();
        const auto prios = priority_map();

        std::vector<report::ResolutionRow> rows;
        std::vector<Artifact> alive;
        for (const auto& rc : selected()) {
            const auto dir = repo_dir(rc.ref);
            std::vector<lifecycle::CommentLifecycle> satd_lcs;
            for (auto& lc : lifecycle::read_lifecycles(need(dir / "lifecycles.jsonl"))) {
                auto it = labels.find(lc.comment_id);
                if (it == labels.end() || !it->second.is_satd) continue;
                if (lc.alive()) {
                    Artifact a;
                    a.id = lc.comment_id;
                    a.repo = rc.ref;
                    a.kind = ArtifactKind::Comment;
                    a.file_path = lc.file_path;
                    a.start_line = lc.start_line;
                    a.end_line = lc.end_line;
                    alive.push_back(std::move(a));
                }
                satd_lcs.push_back(std::move(lc));
            }
            std::optional<report::RepoScale> scale;
            if (fs::exists(dir / "scale.json")) {
                const Json s = Json::parse(read_file(dir / "scale.json"));
                scale = report::make_scale(rc.ref, s.at("source_lines").get<std::size_t>(), s.at("contributors").get<std::size_t>());
            }
            rows.push_back(report::resolution_row(rc.ref, satd_lcs, scale));
        }
        report::write_text(reports() / "resolution.csv", report::resolution_csv(rows));
        report::write_text(reports() / "removal_days.csv", report::removal_days_csv(rows));
        report::write_text(reports() / "correlations.csv", report::correlations_csv(report::scale_correlations(rows)));

        std::vector<report::PriorityInput> inputs;
        for (const auto& a : arts) {
            if (is_main(a.kind)) continue;
            const auto& l = labels.at(a.id);
            if (!l.is_satd) continue;
            report::PriorityInput in;
            in.kind = main_kind(a.kind);
            in.satd_class = l.satd_class;
            if (auto it = sentiments.find(a.id); it != sentiments.end()) in.sentiment = it->second.label;
            in.priority = prios.at(a.id);
            inputs.push_back(in);
        }
        const auto summary = report::priority_summary(inputs);
        report::write_text(reports() / "priority_by_kind.csv", report::group_csv("kind", summary.by_kind));
        report::write_text(reports() / "priority_by_class.csv", report::group_csv("satd_class", summary.by_class));
        report::write_text(reports() / "priority_by_sentiment.csv", report::group_csv("sentiment", summary.by_sentiment));

        std::vector<priority::SonarIssue> issues;
        bool any_export = false;
        for (const auto& rc : selected()) {
            if (!rc.sonar) continue;
            any_export = true;
            auto imp = priority::load_sonar(*rc.sonar, rc.ref);
            issues.insert(issues.end(), imp.issues.begin(), imp.issues.end());
        }
        const auto matches = priority::match_sonar(alive, issues, cfg_.sonar_window);
        std::vector<std::pair<priority::Severity, double>> scored;
        for (const auto& m : matches) scored.emplace_back(issues[m.issue_index].severity, prios.at(m.comment_id));
        std::optional<priority::AlignmentReport> alignment;
        std::string note = any_export ? "insufficient_data" : "no_sonar_export";
        if (scored.size() >= 3) alignment = priority::severity_alignment(scored);
        report::write_text(reports() / "sonar_alignment.csv", report::sonar_alignment_csv(alignment, matches.size(), note));

        write_file_atomic(reports() / "run_manifest.json", [&](std::ostream& o) { o << manifest().dump(2) << '\n'; });
    }

    /// Configuration, tool version and digests of every input, with paths
    /// relative to the configuration directory. No timestamps.
    Json manifest() const {
        Json inputs = Json::object();
        auto add = [&](const std::optional<fs::path>& p) {
            if (p && fs::is_regular_file(*p)) inputs[relative(*p)] = sha256_hex(read_file(*p));
        };
        add(config_file_);
        add(cfg_.patterns);
        add(cfg_.languages);
        add(cfg_.lexicon);
        add(cfg_.priority_terms);
        add(cfg_.satd_predictions);
        add(cfg_.sentiment_predictions);
        add(cfg_.provider.vectors);
        Json heads = Json::object();
        for (const auto& rc : selected()) {
            add(rc.sonar);
            const auto cdir = forge::cache_dir_for(cfg_.cache_dir, rc.ref);
            for (const char* f : {"manifest.json", "commits.jsonl", "pulls.jsonl", "issues.jsonl", "sections.jsonl"})
                add(cdir / f);
            if (!rc.ref.clone_path.empty() && git::Repository::is_repository(rc.ref.clone_path))
                heads[rc.ref.identifier()] = git::Repository(rc.ref.clone_path).head_sha();
        }
        return Json{{"tool", "satd-atlas"},
                    {"version", kToolVersion},
                    {"schema_version", kSchemaVersion},
                    {"config", cfg_.raw},
                    {"inputs", inputs},
                    {"clone_heads", heads}};
    }

private:
    struct Folded {
        propagation::LabelMap labels;
        propagation::PriorityMap priorities;
    };

    static bool is_main(ArtifactKind k) { return k == ArtifactKind::PullRequest || k == ArtifactKind::Issue; }

    void log(const std::string& m) const {
        if (log_) log_("[" + stage_ + "] " + m);
    }

    std::string relative(const fs::path& p) const {
        auto rel = p.lexically_relative(cfg_.base_dir);
        return (rel.empty() ? p : rel).generic_string();
    }

    static fs::path need(const fs::path& p) {
        if (!fs::exists(p)) throw Error(ErrorCode::NotFound, p.string() + " is missing; run the earlier stages first");
        return p;
    }

    static void require_clone(const config::RepoConfig& rc) {
        if (rc.ref.clone_path.empty())
            throw Error(ErrorCode::CloneUnavailable, rc.ref.identifier() + " has no clone path configured");
    }

    static void write_warnings(const fs::path& path, const std::vector<extract::ExtractWarning>& ws) {
        write_jsonl(path, ws, [](const extract::ExtractWarning& w) {
            return Json{{"file_path", w.file_path}, {"line", w.line}, {"code", std::string(to_string(w.code))}, {"message", w.message}};
        });
    }

    extract::ProfileTable profile_table() const {
        return cfg_.languages ? extract::ProfileTable::load(*cfg_.languages) : extract::ProfileTable::defaults();
    }

    /// Repositories chosen by `select`, in configuration order.
    std::vector<config::RepoConfig> selected() const {
        const auto path = need(work() / "selected.json");
        std::set<std::string> ids;
        for (const auto& id : Json::parse(read_file(path))) ids.insert(id.get<std::string>());
        std::vector<config::RepoConfig> out;
        for (const auto& rc : cfg_.repos)
            if (ids.count(rc.ref.identifier())) out.push_back(rc);
        return out;
    }

    /// Runs `fn` for every selected repository; data errors become rejects
    /// and the remaining repositories still run.
    template <class Fn>
    void for_each_repo(Fn&& fn) {
        for (const auto& rc : selected()) {
            try {
                fn(rc);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::Config) throw;
                add_reject({stage_, rc.ref.identifier(), std::string(to_string(e.code())), e.what(), {}, {}});
                log(rc.ref.identifier() + ": " + e.what());
            }
        }
    }

    forge::ClientOptions client_options() {
        forge::ClientOptions o;
        o.log = [this](const std::string& m) { log(m); };
        return o;
    }

    RepoMetadata metadata(const config::RepoConfig& rc) {
        RepoMetadata m{rc.commits, rc.contributors, rc.stars, rc.created_at, rc.last_activity};
        if (!m.stars && !cfg_.offline) {
            try {
                forge::HttplibTransport t(cfg_.api_base);
                forge::ApiClient api(t, forge::ForgeAuth::from_environment(cfg_.token_file), client_options());
                const Json j = api.get_json("/repos/" + rc.ref.owner + "/" + rc.ref.name);
                m.stars = j.value("stargazers_count", std::uint64_t{0});
                if (!m.created_at && j.contains("created_at")) m.created_at = parse_timestamp(j["created_at"].get<std::string>());
                if (!m.last_activity && j.contains("pushed_at")) m.last_activity = parse_timestamp(j["pushed_at"].get<std::string>());
            } catch (const Error& e) {
                if (e.code() == ErrorCode::Config) throw;
                add_reject({stage_, rc.ref.identifier(), std::string(to_string(e.code())), e.what(), {}, {}});
            }
        }
        if ((!m.commits || !m.contributors || !m.created_at || !m.last_activity) && !rc.ref.clone_path.empty()) {
            try {
                git::Repository g(rc.ref.clone_path);
                const auto hist = g.full_history();
                std::set<std::string> authors;
                std::optional<Timestamp> first, last;
                for (const auto& c : hist) {
                    authors.insert(report::author_identity(c.author_name, c.author_email));
                    if (!first || c.authored_at < *first) first = c.authored_at;
                    if (!last || c.committed_at > *last) last = c.committed_at;
                }
                if (!m.commits) m.commits = hist.size();
                if (!m.contributors) m.contributors = authors.size();
                if (!m.created_at) m.created_at = first;
                if (!m.last_activity) m.last_activity = last;
            } catch (const Error& e) {
                add_reject({stage_, rc.ref.identifier(), std::string(to_string(e.code())), e.what(), {}, {}});
            }
        }
        return m;
    }

    /// Every artifact of the selected repositories, sorted by id.
    std::vector<Artifact> all_artifacts() const {
        std::vector<Artifact> out;
        for (const auto& rc : selected()) {
            auto a = read_artifacts(need(repo_dir(rc.ref) / "artifacts.jsonl"));
            out.insert(out.end(), std::make_move_iterator(a.begin()), std::make_move_iterator(a.end()));
        }
        std::sort(out.begin(), out.end(), [](const Artifact& a, const Artifact& b) { return a.id < b.id; });
        return out;
    }

    detect::ImportResult import_predictions(const fs::path& path, detect::PredictionKind kind,
                                            const std::vector<Artifact>& arts) {
        std::unordered_set<std::string> known;
        for (const auto& a : arts) known.insert(a.id);
        auto imp = detect::import_predictions(path, kind, known);
        for (const auto& r : imp.rejects)
            add_reject({stage_, "", "Rejected", r.reason, r.artifact_id, r.line});
        log(relative(path) + ": " + std::to_string(imp.satd.size() + imp.sentiment.size()) + " imported, " +
            std::to_string(imp.rejects.size()) + " rejected");
        return imp;
    }

    std::unordered_map<std::string, SatdLabel> satd_map() const {
        std::unordered_map<std::string, SatdLabel> m;
        for (auto& l : detect::read_satd_labels(need(work() / "satd_labels.jsonl"))) m[l.artifact_id] = std::move(l);
        return m;
    }
    std::unordered_map<std::string, SentimentLabel> sentiment_map() const {
        std::unordered_map<std::string, SentimentLabel> m;
        for (auto& l : detect::read_sentiment_labels(need(work() / "sentiment_labels.jsonl"))) m[l.artifact_id] = std::move(l);
        return m;
    }
    std::unordered_map<std::string, double> priority_map() const {
        std::unordered_map<std::string, double> m;
        for (auto& s : priority::read_priorities(need(work() / "priorities.jsonl"))) m[s.artifact_id] = s.score;
        return m;
    }

    /// A PR or issue counts as SATD when it or any of its sections does; its
    /// priority is then the mean over its SATD sections (or its own score).
    Folded fold(const std::vector<Artifact>& arts) const {
        const auto labels = satd_map();
        const auto prios = priority_map();
        Folded f;
        std::unordered_map<std::string, std::vector<double>> section_prios;
        for (const auto& a : arts) {
            auto l = labels.find(a.id);
            if (l == labels.end()) throw Error(ErrorCode::MissingLabel, "no SATD label for " + a.id);
            f.labels[a.id] = l->second.is_satd;
            if (!l->second.is_satd) continue;
            auto p = prios.find(a.id);
            if (p == prios.end()) throw Error(ErrorCode::MissingLabel, "no priority for " + a.id);
            f.priorities[a.id] = p->second;
            if (!is_main(a.kind) && a.parent_id && main_kind(a.kind) != a.kind) section_prios[*a.parent_id].push_back(p->second);
        }
        for (const auto& a : arts) {
            if (!is_main(a.kind)) continue;
            auto sp = section_prios.find(a.id);
            if (sp == section_prios.end()) continue;
            f.labels[a.id] = true;
            f.priorities[a.id] = stats::mean(sp->second);
        }
        return f;
    }

    bool has_provider() const { return cfg_.provider.vectors || !cfg_.provider.command.empty(); }

    /// A bare command name is looked up next to this executable first, then on PATH.
    std::vector<std::string> provider_command() const {
        auto cmd = cfg_.provider.command;
        if (!cmd.empty() && cmd[0].find('/') == std::string::npos) {
            std::error_code ec;
            const auto self = fs::read_symlink("/proc/self/exe", ec);
            if (!ec && fs::exists(self.parent_path() / cmd[0])) cmd[0] = (self.parent_path() / cmd[0]).string();
        }
        return cmd;
    }

    std::vector<double> embedding_scores(const std::vector<Artifact>& arts, const priority::TermList& terms) const {
        if (!has_provider())
            throw Error(ErrorCode::Config, "the embedding heuristics need provider.command or provider.vectors");
        priority::EmbeddingSet set;
        if (cfg_.provider.vectors) {
            set = priority::load_vector_file(*cfg_.provider.vectors);
        } else {
            std::vector<std::pair<std::string, std::string>> req;
            for (const auto& t : terms.terms) req.emplace_back(priority::term_key(t), t);
            for (const auto& a : arts) req.emplace_back(a.id, a.text);
            set = priority::SubprocessProvider(provider_command()).embed(req);
        }
        std::vector<priority::Vector> tv;
        for (const auto& t : terms.terms) {
            const auto* v = set.find(priority::term_key(t));
            if (!v) throw Error(ErrorCode::ProviderFailure, "no vector for term '" + t + "'");
            tv.push_back(*v);
        }
        const auto c = priority::centroid(tv);
        std::vector<double> out;
        for (const auto& a : arts) {
            const auto* v = set.find(a.id);
            if (!v) throw Error(ErrorCode::ProviderFailure, "no vector for " + a.id);
            // An artifact without any embeddable content carries no priority signal.
            out.push_back(priority::norm(*v) == 0.0 ? 0.0 : priority::score_embedding(*v, c));
        }
        return out;
    }

    /// Scores of `arts` under each requested heuristic. TF-IDF document
    /// frequencies come from `corpus` when given, else from `arts`.
    std::map<priority::Heuristic, std::vector<double>> heuristic_scores(const std::vector<Artifact>& arts,
                                                                       std::set<priority::Heuristic> which,
                                                                       const std::vector<Artifact>* corpus = nullptr) const {
        using priority::Heuristic;
        if (!cfg_.priority_terms) throw Error(ErrorCode::Config, "priority_terms is not configured");
        const auto terms = priority::load_terms(*cfg_.priority_terms);
        const bool hybrid = which.count(Heuristic::Hybrid) > 0;
        std::map<Heuristic, std::vector<double>> out;
        if (hybrid || which.count(Heuristic::Lexical)) {
            auto& v = out[Heuristic::Lexical];
            for (const auto& a : arts) v.push_back(priority::score_lexical(a.text, terms));
        }
        if (hybrid || which.count(Heuristic::TfIdf)) {
            std::vector<std::string> texts;
            for (const auto& a : corpus ? *corpus : arts) texts.push_back(a.text);
            const priority::TfIdfScorer scorer(terms, priority::build_corpus_stats(texts));
            auto& v = out[Heuristic::TfIdf];
            for (const auto& a : arts) v.push_back(scorer.score(a.text));
        }
        if (hybrid || which.count(Heuristic::EmbeddingCentroid)) out[Heuristic::EmbeddingCentroid] = embedding_scores(arts, terms);
        if (hybrid)
            out[Heuristic::Hybrid] = priority::hybrid_scores(
                {out[Heuristic::EmbeddingCentroid], out[Heuristic::Lexical], out[Heuristic::TfIdf]});
        std::erase_if(out, [&](const auto& kv) { return !which.count(kv.first); });
        return out;
    }

    config::RunConfig cfg_;
    Log log_;
    std::optional<fs::path> config_file_;
    std::string stage_ = "-";
    std::vector<Reject> rejects_;
};

} // namespace satd::pipeline
