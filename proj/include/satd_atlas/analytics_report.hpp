#pragma once

#include "satd_atlas/comment_extract.hpp"
#include "satd_atlas/comment_lifecycle.hpp"
#include "satd_atlas/core_model.hpp"
#include "satd_atlas/git.hpp"
#include "satd_atlas/priority.hpp"
#include "satd_atlas/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace satd::report {

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string num(double v, int digits = 6) {
    if (!std::isfinite(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    std::string s = buf;
    // no "-0.000000"
    if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

inline std::string num(const std::optional<double>& v, int digits = 6) { return v ? num(*v, digits) : ""; }

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : width_(header.size()) { row(header); }

    CsvWriter& row(const std::vector<std::string>& cells) {
        if (cells.size() != width_) throw Error(ErrorCode::SchemaMismatch, "CSV row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ += ',';
            out_ += csv_field(cells[i]);
        }
        out_ += '\n';
        return *this;
    }

    const std::string& str() const { return out_; }

private:
    std::size_t width_;
    std::string out_;
};

inline void write_text(const std::filesystem::path& path, const std::string& content) {
    write_file_atomic(path, [&](std::ostream& out) { out << content; });
}

// ---------------------------------------------------------------------------
// Quantile bins

struct BinItem {
    std::string id;
    std::size_t tokens = 0;
};

struct Bin {
    std::size_t index = 0;
    std::size_t lo = 0;
    std::size_t hi = 0;
    std::vector<std::string> ids;
};

/// Items with at least `min_tokens` tokens, sorted by (tokens, id) and cut
/// into `k` contiguous groups whose sizes differ by at most one, larger
/// groups first.
inline std::vector<Bin> quantile_bins(std::vector<BinItem> items, std::size_t k = 10, std::size_t min_tokens = 10) {
    if (k == 0) throw Error(ErrorCode::Config, "bin count must be positive");
    std::erase_if(items, [&](const BinItem& b) { return b.tokens < min_tokens; });
    if (items.size() < k)
        throw Error(ErrorCode::TooFewItems, std::to_string(items.size()) + " items with at least " +
                                                std::to_string(min_tokens) + " tokens; need " + std::to_string(k));
    std::sort(items.begin(), items.end(),
              [](const BinItem& a, const BinItem& b) { return std::tie(a.tokens, a.id) < std::tie(b.tokens, b.id); });
    const std::size_t base = items.size() / k, extra = items.size() % k;
    std::vector<Bin> bins;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < k; ++b) {
        const std::size_t size = base + (b < extra ? 1 : 0);
        Bin bin;
        bin.index = b;
        bin.lo = items[pos].tokens;
        bin.hi = items[pos + size - 1].tokens;
        for (std::size_t i = pos; i < pos + size; ++i) bin.ids.push_back(items[i].id);
        bins.push_back(std::move(bin));
        pos += size;
    }
    return bins;
}

struct LengthBinRow {
    std::size_t bin = 0;
    std::size_t lo = 0;
    std::size_t hi = 0;
    std::size_t count = 0;
    double satd_rate = 0.0;
    std::optional<double> mean_priority;
    std::optional<double> mean_sentiment;  // mean NonNegative probability
};

struct ArtifactFacts {
    std::size_t tokens = 0;
    bool is_satd = false;
    std::optional<double> priority;
    std::optional<double> non_negative;
};

inline std::vector<LengthBinRow> length_bin_report(const std::map<std::string, ArtifactFacts>& facts,
                                                   std::size_t k = 10, std::size_t min_tokens = 10) {
    std::vector<BinItem> items;
    for (const auto& [id, f] : facts) items.push_back({id, f.tokens});
    std::vector<LengthBinRow> rows;
    for (const auto& bin : quantile_bins(std::move(items), k, min_tokens)) {
        LengthBinRow r;
        r.bin = bin.index;
        r.lo = bin.lo;
        r.hi = bin.hi;
        r.count = bin.ids.size();
        std::size_t satd = 0, with_sent = 0, with_pri = 0;
        double pri = 0, sent = 0;
        for (const auto& id : bin.ids) {
            const auto& f = facts.at(id);
            if (f.is_satd) {
                ++satd;
                if (f.priority) {
                    pri += *f.priority;
                    ++with_pri;
                }
            }
            if (f.non_negative) {
                sent += *f.non_negative;
                ++with_sent;
            }
        }
        r.satd_rate = static_cast<double>(satd) / static_cast<double>(r.count);
        if (with_pri) r.mean_priority = pri / static_cast<double>(with_pri);
        if (with_sent) r.mean_sentiment = sent / static_cast<double>(with_sent);
        rows.push_back(r);
    }
    return rows;
}

inline std::string length_bins_csv(const std::vector<LengthBinRow>& rows) {
    CsvWriter w({"bin", "token_lo", "token_hi", "count", "satd_rate", "mean_priority", "mean_non_negative_probability"});
    for (const auto& r : rows)
        w.row({std::to_string(r.bin), std::to_string(r.lo), std::to_string(r.hi), std::to_string(r.count),
               num(r.satd_rate), num(r.mean_priority), num(r.mean_sentiment)});
    return w.str();
}

// ---------------------------------------------------------------------------
// Priority summaries

struct GroupRow {
    std::string group;
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
};

struct PriorityInput {
    ArtifactKind kind = ArtifactKind::Comment;
    SatdClass satd_class = SatdClass::NonSATD;
    std::optional<Sentiment> sentiment;
    double priority = 0.0;
};

struct PrioritySummary {
    std::vector<GroupRow> by_kind;
    std::vector<GroupRow> by_class;
    std::vector<GroupRow> by_sentiment;
};

namespace detail {

inline std::vector<GroupRow> group_rows(const std::map<std::string, std::vector<double>>& groups) {
    std::vector<GroupRow> out;
    for (const auto& [g, v] : groups) out.push_back({g, v.size(), stats::mean(v), stats::median(v)});
    return out;
}

} // namespace detail

/// Mean and median priority of SATD artifacts grouped by kind, by class,
/// and by sentiment label.
inline PrioritySummary priority_summary(const std::vector<PriorityInput>& satd_artifacts) {
    std::map<std::string, std::vector<double>> kind, cls, sent;
    for (const auto& a : satd_artifacts) {
        kind[std::string(to_string(a.kind))].push_back(a.priority);
        cls[std::string(to_string(a.satd_class))].push_back(a.priority);
        if (a.sentiment) sent[std::string(to_string(*a.sentiment))].push_back(a.priority);
    }
    return {detail::group_rows(kind), detail::group_rows(cls), detail::group_rows(sent)};
}

inline std::string group_csv(const std::string& key, const std::vector<GroupRow>& rows) {
    CsvWriter w({key, "n", "mean_priority", "median_priority"});
    for (const auto& r : rows) w.row({r.group, std::to_string(r.n), num(r.mean), num(r.median)});
    return w.str();
}

// ---------------------------------------------------------------------------
// Repository scale

struct RepoScale {
    RepoRef repo;
    double kloc = 0.0;
    std::size_t contributors = 0;
    double kloc_per_contributor = 0.0;
    std::size_t source_lines = 0;
};

inline RepoScale make_scale(const RepoRef& repo, std::size_t source_lines, std::size_t contributors) {
    if (contributors == 0) throw Error(ErrorCode::EmptyHistory, repo.identifier() + " has no contributors");
    RepoScale s;
    s.repo = repo;
    s.source_lines = source_lines;
    s.kloc = static_cast<double>(source_lines) / 1000.0;
    s.contributors = contributors;
    s.kloc_per_contributor = s.kloc / static_cast<double>(contributors);
    return s;
}

inline std::string author_identity(const std::string& name, const std::string& email) {
    if (!email.empty()) return to_lower_ascii(email);
    return name;
}

inline std::size_t non_empty_lines(std::string_view text) {
    std::size_t n = 0;
    bool content = false;
    for (char c : text) {
        if (c == '\n') {
            n += content;
            content = false;
        } else if (!is_space(c)) {
            content = true;
        }
    }
    return n + content;
}

/// KLOC over recognized source files at HEAD divided by distinct authors
/// over the full history.
inline RepoScale repo_scale(const RepoRef& repo, const extract::ProfileTable& profiles) {
    git::Repository g(repo.clone_path);
    const auto head = g.head_sha();
    std::size_t lines = 0;
    for (const auto& f : g.tracked_files(head)) {
        if (!profiles.detect(f)) continue;
        if (auto blob = g.read_blob(head, f)) lines += non_empty_lines(*blob);
    }
    std::set<std::string> authors;
    for (const auto& c : g.full_history()) authors.insert(author_identity(c.author_name, c.author_email));
    return make_scale(repo, lines, authors.size());
}

// ---------------------------------------------------------------------------
// Resolution and removal time

struct ResolutionRow {
    RepoRef repo;
    std::size_t introduced = 0;
    std::size_t removed = 0;
    double rate = 0.0;
    bool degenerate = false;
    std::optional<RepoScale> scale;
    std::vector<double> removal_days;
};

inline ResolutionRow resolution_row(const RepoRef& repo, const std::vector<lifecycle::CommentLifecycle>& satd_lifecycles,
                                    std::optional<RepoScale> scale = std::nullopt) {
    ResolutionRow r;
    r.repo = repo;
    auto s = lifecycle::lifecycle_stats(repo, satd_lifecycles);
    r.introduced = s.introduced_count;
    r.removed = s.removed_count;
    auto rate = lifecycle::resolution_rate(static_cast<std::int64_t>(r.introduced), static_cast<std::int64_t>(r.removed));
    r.rate = rate.value;
    r.degenerate = rate.degenerate;
    r.removal_days = std::move(s.removal_days);
    r.scale = std::move(scale);
    return r;
}

inline std::string resolution_csv(const std::vector<ResolutionRow>& rows) {
    CsvWriter w({"repo", "introduced", "removed", "resolution_rate", "kloc", "contributors", "kloc_per_contributor"});
    for (const auto& r : rows)
        w.row({r.repo.identifier(), std::to_string(r.introduced), std::to_string(r.removed),
               r.degenerate ? "" : num(r.rate), r.scale ? num(r.scale->kloc, 3) : "",
               r.scale ? std::to_string(r.scale->contributors) : "",
               r.scale ? num(r.scale->kloc_per_contributor) : ""});
    if (!rows.empty()) {
        std::vector<double> rates;
        for (const auto& r : rows)
            if (!r.degenerate) rates.push_back(r.rate);
        if (!rates.empty())
            w.row({"mean", "", "", num(stats::mean(rates)), "", "", ""}).row({"median", "", "", num(stats::median(rates)), "", "", ""});
    }
    return w.str();
}

inline std::string removal_days_csv(const std::vector<ResolutionRow>& rows) {
    CsvWriter w({"repo", "removed", "mean_days", "median_days", "q1_days", "q3_days"});
    std::vector<double> medians;
    for (const auto& r : rows) {
        if (r.removal_days.empty()) {
            w.row({r.repo.identifier(), "0", "", "", "", ""});
            continue;
        }
        auto s = stats::summarize(r.removal_days);
        medians.push_back(s.median);
        w.row({r.repo.identifier(), std::to_string(s.n), num(s.mean, 2), num(s.median, 2), num(s.q1, 2), num(s.q3, 2)});
    }
    if (!medians.empty()) w.row({"median_of_medians", "", "", num(stats::median(medians), 2), "", ""});
    return w.str();
}

struct CorrelationRow {
    std::string x;
    std::string y;
    std::size_t n = 0;
    std::optional<stats::Correlation> result;
    std::string note;
};

inline CorrelationRow correlate(std::string x, std::string y, const std::vector<double>& xs,
                                const std::vector<double>& ys) {
    CorrelationRow r{std::move(x), std::move(y), xs.size(), std::nullopt, ""};
    try {
        r.result = stats::spearman(xs, ys);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InsufficientData) r.note = "insufficient_data";
        else if (e.code() == ErrorCode::DegenerateInput) r.note = "degenerate_input";
        else throw;
    }
    return r;
}

/// Spearman of KLOC per contributor against resolution rate and against the
/// per-repository median removal time.
inline std::vector<CorrelationRow> scale_correlations(const std::vector<ResolutionRow>& rows) {
    std::vector<double> k1, rate, k2, days;
    for (const auto& r : rows) {
        if (!r.scale) continue;
        if (!r.degenerate) {
            k1.push_back(r.scale->kloc_per_contributor);
            rate.push_back(r.rate);
        }
        if (!r.removal_days.empty()) {
            k2.push_back(r.scale->kloc_per_contributor);
            days.push_back(stats::median(r.removal_days));
        }
    }
    std::vector<CorrelationRow> out;
    out.push_back(correlate("kloc_per_contributor", "resolution_rate", k1, rate));
    auto d = correlate("kloc_per_contributor", "median_removal_days", k2, days);
    if (d.note.empty()) d.note = "per-repository median removal days";
    out.push_back(std::move(d));
    return out;
}

inline std::string correlations_csv(const std::vector<CorrelationRow>& rows) {
    CsvWriter w({"x", "y", "method", "n", "coefficient", "p_value", "note"});
    for (const auto& r : rows)
        w.row({r.x, r.y, "spearman_t_approx", std::to_string(r.n), r.result ? num(r.result->coefficient) : "",
               r.result ? num(r.result->p_value) : "", r.note});
    return w.str();
}

// ---------------------------------------------------------------------------
// Sonar alignment

inline std::string sonar_alignment_csv(const std::optional<priority::AlignmentReport>& r, std::size_t matches,
                                       const std::string& note) {
    CsvWriter w({"section", "key", "n", "value", "p_value", "mean", "median", "q1", "q3"});
    w.row({"matches", "total", std::to_string(matches), "", "", "", "", "", ""});
    if (!r) {
        w.row({"status", note, "", "", "", "", "", "", ""});
        return w.str();
    }
    auto corr = [&](const char* name, const std::optional<stats::Correlation>& c) {
        w.row({"correlation", name, std::to_string(r->n), c ? num(c->coefficient) : "", c ? num(c->p_value) : "", "", "",
               "", ""});
    };
    corr("pearson", r->pearson);
    corr("spearman", r->spearman);
    if (r->degenerate) w.row({"status", "degenerate_input", "", "", "", "", "", "", ""});
    for (const auto& g : r->groups)
        w.row({"severity", std::string(priority::to_string(g.severity)), std::to_string(g.summary.n), "", "",
               num(g.summary.mean), num(g.summary.median), num(g.summary.q1), num(g.summary.q3)});
    return w.str();
}

inline std::string ablation_csv(const std::vector<priority::Agreement>& rows) {
    CsvWriter w({"heuristic_a", "heuristic_b", "n", "k", "spearman_rho", "jaccard_at_k"});
    for (const auto& r : rows)
        w.row({r.first, r.second, std::to_string(r.n), std::to_string(r.k), num(r.spearman_rho), num(r.jaccard)});
    return w.str();
}

} // namespace satd::report
