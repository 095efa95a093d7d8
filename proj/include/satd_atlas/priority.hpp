#pragma once

#include "satd_atlas/core_model.hpp"
#include "satd_atlas/detect.hpp"
#include "satd_atlas/statistics.hpp"
#include "satd_atlas/subprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace satd::priority {

using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// Term lists

struct TermList {
    std::vector<std::string> terms;

    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        if (terms.empty()) out.push_back("term list is empty");
        std::set<std::string> seen;
        for (const auto& t : terms) {
            if (t.empty()) out.push_back("empty term");
            if (t != to_lower_ascii(t)) out.push_back("term not lowercase: " + t);
            if (!seen.insert(t).second) out.push_back("duplicate term: " + t);
        }
        return out;
    }
};

/// One term per line; blank lines and `#` comments are skipped.
inline TermList parse_terms(std::string_view content) {
    TermList list;
    std::istringstream in{std::string(content)};
    std::string line;
    while (std::getline(in, line)) {
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        auto e = line.find_last_not_of(" \t\r");
        list.terms.push_back(line.substr(b, e - b + 1));
    }
    if (auto p = list.problems(); !p.empty()) {
        if (list.terms.empty()) throw Error(ErrorCode::EmptyTermSet, "no priority terms");
        throw Error(ErrorCode::Config, "invalid term list: " + p.front());
    }
    return list;
}

inline TermList load_terms(const std::filesystem::path& path) { return parse_terms(read_file(path)); }

// ---------------------------------------------------------------------------
// Embeddings

struct EmbeddingSet {
    std::size_t dimension = 0;
    std::unordered_map<std::string, Vector> vectors;

    void add(const std::string& key, Vector v) {
        if (v.empty()) throw Error(ErrorCode::DimensionMismatch, "empty vector for '" + key + "'");
        if (dimension == 0) dimension = v.size();
        if (v.size() != dimension)
            throw Error(ErrorCode::DimensionMismatch, "vector for '" + key + "' has dimension " +
                                                          std::to_string(v.size()) + ", expected " +
                                                          std::to_string(dimension));
        for (double x : v)
            if (!std::isfinite(x)) throw Error(ErrorCode::DegenerateInput, "non-finite component for '" + key + "'");
        vectors[key] = std::move(v);
    }

    const Vector* find(const std::string& key) const {
        auto it = vectors.find(key);
        return it == vectors.end() ? nullptr : &it->second;
    }
};

/// JSONL `{key, vector:[...]}`.
inline EmbeddingSet load_vector_file(const std::filesystem::path& path) {
    EmbeddingSet set;
    read_jsonl(path, [&](const Json& j, std::size_t lineno) {
        try {
            set.add(j.at("key").get<std::string>(), j.at("vector").get<Vector>());
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    });
    return set;
}

inline double norm(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// Mean of the unit-normalized term vectors. Not re-normalized.
inline Vector centroid(const std::vector<Vector>& term_vectors) {
    if (term_vectors.empty()) throw Error(ErrorCode::EmptyTermSet, "no term vectors");
    const auto dim = term_vectors.front().size();
    if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "zero-dimensional term vector");
    Vector c(dim, 0.0);
    for (const auto& v : term_vectors) {
        if (v.size() != dim) throw Error(ErrorCode::DimensionMismatch, "term vectors differ in dimension");
        const double n = norm(v);
        if (n == 0.0) throw Error(ErrorCode::ZeroVector, "term vector with zero norm");
        for (std::size_t i = 0; i < dim; ++i) c[i] += v[i] / n;
    }
    for (auto& x : c) x /= static_cast<double>(term_vectors.size());
    return c;
}

inline double cosine(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "vector dimensions differ");
    const double na = norm(a), nb = norm(b);
    if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

inline double score_embedding(const Vector& artifact_vector, const Vector& c) { return cosine(artifact_vector, c); }

// ---------------------------------------------------------------------------
// Lexical and TF-IDF

/// Share of terms that occur in the text. Multi-word terms must occur as a
/// contiguous token sequence.
inline double score_lexical(std::string_view text, const TermList& terms) {
    if (terms.terms.empty()) throw Error(ErrorCode::EmptyTermSet, "no priority terms");
    const auto tokens = detect::word_tokens(text);
    std::size_t hits = 0;
    for (const auto& t : terms.terms)
        if (detect::count_phrase(tokens, detect::word_tokens(t)) > 0) ++hits;
    return static_cast<double>(hits) / static_cast<double>(terms.terms.size());
}

struct CorpusStats {
    std::size_t documents = 0;
    std::unordered_map<std::string, std::size_t> document_frequency;

    void add_document(std::string_view text) {
        ++documents;
        auto tokens = detect::word_tokens(text);
        std::sort(tokens.begin(), tokens.end());
        tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
        for (auto& t : tokens) ++document_frequency[t];
    }

    double idf(const std::string& token) const {
        auto it = document_frequency.find(token);
        const double df = it == document_frequency.end() ? 0.0 : static_cast<double>(it->second);
        return std::log((1.0 + static_cast<double>(documents)) / (1.0 + df)) + 1.0;
    }
};

template <class Range>
CorpusStats build_corpus_stats(const Range& texts) {
    CorpusStats s;
    for (const auto& t : texts) s.add_document(t);
    return s;
}

using SparseVector = std::map<std::string, double>;

inline SparseVector tfidf_vector(const std::vector<std::string>& tokens, const CorpusStats& stats) {
    SparseVector v;
    for (const auto& t : tokens) v[t] += 1.0;
    for (auto& [t, w] : v) w *= stats.idf(t);
    return v;
}

inline double sparse_cosine(const SparseVector& a, const SparseVector& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [t, w] : a) {
        na += w * w;
        if (auto it = b.find(t); it != b.end()) dot += w * it->second;
    }
    for (const auto& [t, w] : b) nb += w * w;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

/// Cosine between the text's TF-IDF vector and that of the term list taken
/// as one document. TF is the raw count; IDF = ln((1+N)/(1+df)) + 1.
class TfIdfScorer {
public:
    TfIdfScorer(const TermList& terms, CorpusStats stats) : stats_(std::move(stats)) {
        if (stats_.documents == 0) throw Error(ErrorCode::EmptyCorpus, "TF-IDF corpus is empty");
        if (terms.terms.empty()) throw Error(ErrorCode::EmptyTermSet, "no priority terms");
        std::vector<std::string> tokens;
        for (const auto& t : terms.terms)
            for (auto& tok : detect::word_tokens(t)) tokens.push_back(std::move(tok));
        query_ = tfidf_vector(tokens, stats_);
    }

    double score(std::string_view text) const { return sparse_cosine(tfidf_vector(detect::word_tokens(text), stats_), query_); }

private:
    CorpusStats stats_;
    SparseVector query_;
};

inline double score_tfidf(std::string_view text, const TermList& terms, const CorpusStats& stats) {
    return TfIdfScorer(terms, stats).score(text);
}

// ---------------------------------------------------------------------------
// Heuristics and rankings

enum class Heuristic { EmbeddingCentroid, Lexical, TfIdf, Hybrid };

inline constexpr Heuristic kAllHeuristics[] = {Heuristic::EmbeddingCentroid, Heuristic::Lexical, Heuristic::TfIdf,
                                               Heuristic::Hybrid};

constexpr std::string_view to_string(Heuristic h) {
    switch (h) {
    case Heuristic::EmbeddingCentroid: return "EmbeddingCentroid";
    case Heuristic::Lexical: return "Lexical";
    case Heuristic::TfIdf: return "TfIdf";
    case Heuristic::Hybrid: return "Hybrid";
    }
    return "?";
}

inline Heuristic parse_heuristic(std::string_view s) {
    for (auto h : kAllHeuristics)
        if (to_string(h) == s) return h;
    throw Error(ErrorCode::Config, "unknown heuristic '" + std::string(s) + "'");
}

struct PriorityScore {
    std::string artifact_id;
    Heuristic heuristic = Heuristic::EmbeddingCentroid;
    double score = 0.0;
    friend bool operator==(const PriorityScore&, const PriorityScore&) = default;
};

inline Json to_json(const PriorityScore& s) {
    return Json{{"artifact_id", s.artifact_id}, {"heuristic", std::string(to_string(s.heuristic))}, {"score", s.score}};
}

inline PriorityScore priority_from_json(const Json& j) {
    return {j.at("artifact_id").get<std::string>(), parse_heuristic(j.at("heuristic").get<std::string>()),
            j.at("score").get<double>()};
}

inline std::vector<PriorityScore> read_priorities(const std::filesystem::path& path) {
    std::vector<PriorityScore> out;
    read_jsonl(path, [&](const Json& j, std::size_t lineno) {
        try {
            out.push_back(priority_from_json(j));
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    });
    return out;
}

/// Arithmetic mean of the min-max normalized component scores. A component
/// whose values are all equal contributes 0.
inline std::vector<double> hybrid_scores(const std::vector<std::vector<double>>& components) {
    if (components.empty()) return {};
    const auto n = components.front().size();
    std::vector<double> out(n, 0.0);
    for (const auto& comp : components) {
        if (comp.size() != n) throw Error(ErrorCode::LengthMismatch, "hybrid components differ in length");
        if (n == 0) continue;
        auto [lo, hi] = std::minmax_element(comp.begin(), comp.end());
        const double range = *hi - *lo;
        for (std::size_t i = 0; i < n; ++i) out[i] += range > 0 ? (comp[i] - *lo) / range : 0.0;
    }
    for (auto& x : out) x /= static_cast<double>(components.size());
    return out;
}

/// Artifact ids by descending score, ties broken by id.
inline std::vector<std::string> rank(const std::vector<PriorityScore>& scores) {
    std::vector<const PriorityScore*> ptrs;
    for (const auto& s : scores) ptrs.push_back(&s);
    std::sort(ptrs.begin(), ptrs.end(), [](auto* a, auto* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->artifact_id < b->artifact_id;
    });
    std::vector<std::string> out;
    for (auto* p : ptrs) out.push_back(p->artifact_id);
    return out;
}

// ---------------------------------------------------------------------------
// Ablation

struct Agreement {
    std::string first;
    std::string second;
    double spearman_rho = 0.0;
    double jaccard = 0.0;
    std::size_t k = 0;
    std::size_t n = 0;
};

/// Spearman over rank positions and Jaccard of the top-k sets. When fewer
/// than k artifacts exist, k shrinks to the set size.
inline Agreement agreement(const std::vector<std::string>& a, const std::vector<std::string>& b, std::size_t k = 25) {
    if (a.size() != b.size()) throw Error(ErrorCode::SetMismatch, "rankings differ in size");
    std::unordered_map<std::string, std::size_t> pos_b;
    for (std::size_t i = 0; i < b.size(); ++i)
        if (!pos_b.emplace(b[i], i).second) throw Error(ErrorCode::SetMismatch, "duplicate id " + b[i]);
    std::vector<double> xa, xb;
    std::unordered_set<std::string> seen_a;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto it = pos_b.find(a[i]);
        if (it == pos_b.end()) throw Error(ErrorCode::SetMismatch, a[i] + " missing from one ranking");
        if (!seen_a.insert(a[i]).second) throw Error(ErrorCode::SetMismatch, "duplicate id " + a[i]);
        xa.push_back(static_cast<double>(i));
        xb.push_back(static_cast<double>(it->second));
    }
    Agreement r;
    r.n = a.size();
    r.k = std::min(k, a.size());
    r.spearman_rho = stats::spearman(xa, xb).coefficient;
    std::unordered_set<std::string> top_a(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(r.k));
    std::size_t inter = 0;
    for (std::size_t i = 0; i < r.k; ++i) inter += top_a.count(b[i]);
    const std::size_t uni = 2 * r.k - inter;
    r.jaccard = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
    return r;
}

/// Pairwise agreement for every unordered pair of named rankings.
inline std::vector<Agreement> ablate(const std::map<std::string, std::vector<std::string>>& rankings,
                                     std::size_t k = 25) {
    std::vector<Agreement> out;
    for (auto i = rankings.begin(); i != rankings.end(); ++i)
        for (auto j = std::next(i); j != rankings.end(); ++j) {
            auto r = agreement(i->second, j->second, k);
            r.first = i->first;
            r.second = j->first;
            out.push_back(std::move(r));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Static-analysis alignment

enum class Severity { Info = 0, Minor = 1, Major = 2, Critical = 3, Blocker = 4 };

inline constexpr Severity kAllSeverities[] = {Severity::Info, Severity::Minor, Severity::Major, Severity::Critical,
                                              Severity::Blocker};

constexpr std::string_view to_string(Severity s) {
    switch (s) {
    case Severity::Info: return "INFO";
    case Severity::Minor: return "MINOR";
    case Severity::Major: return "MAJOR";
    case Severity::Critical: return "CRITICAL";
    case Severity::Blocker: return "BLOCKER";
    }
    return "?";
}

inline Severity parse_severity(std::string_view s) {
    const auto up = [&] {
        std::string u(s);
        for (auto& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return u;
    }();
    for (auto v : kAllSeverities)
        if (to_string(v) == up) return v;
    throw Error(ErrorCode::SchemaMismatch, "unknown severity '" + std::string(s) + "'");
}

struct SonarIssue {
    RepoRef repo;
    std::string file_path;
    std::uint32_t line = 1;
    Severity severity = Severity::Info;
    std::string rule;
    std::string key;
};

struct SonarImport {
    std::vector<SonarIssue> issues;
    std::size_t skipped_without_line = 0;
};

/// Parses a SonarQube issue export (`{"issues":[{component, line, severity, rule, key}]}`).
/// The component's `project:` prefix is stripped to get the repository path.
inline SonarImport import_sonar(const Json& j, const RepoRef& repo) {
    SonarImport out;
    if (!j.contains("issues") || !j.at("issues").is_array())
        throw Error(ErrorCode::SchemaMismatch, "sonar export has no issues array");
    for (const auto& is : j.at("issues")) {
        if (!is.contains("line") || is.at("line").is_null()) {
            ++out.skipped_without_line;
            continue;
        }
        SonarIssue s;
        s.repo = repo;
        auto comp = is.at("component").get<std::string>();
        if (auto c = comp.find(':'); c != std::string::npos) comp = comp.substr(c + 1);
        s.file_path = comp;
        const auto line = is.at("line").get<std::int64_t>();
        if (line < 1) throw Error(ErrorCode::SchemaMismatch, "sonar issue line below 1");
        s.line = static_cast<std::uint32_t>(line);
        s.severity = parse_severity(is.at("severity").get<std::string>());
        s.rule = is.value("rule", "");
        s.key = is.value("key", "");
        out.issues.push_back(std::move(s));
    }
    return out;
}

inline SonarImport load_sonar(const std::filesystem::path& path, const RepoRef& repo) {
    try {
        return import_sonar(Json::parse(read_file(path)), repo);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::SchemaMismatch, path.string() + ": " + e.what());
    }
}

struct SonarMatch {
    std::string comment_id;
    std::size_t issue_index = 0;  // into the issue list given to match_sonar
    std::uint32_t issue_line = 0;
    std::uint32_t distance = 0;
    friend bool operator==(const SonarMatch&, const SonarMatch&) = default;
};

/// Distance from `line` to the nearest line of [start, end].
constexpr std::uint32_t line_distance(std::uint32_t line, std::uint32_t start, std::uint32_t end) {
    if (line < start) return start - line;
    if (line > end) return line - end;
    return 0;
}

/// Pairs each comment with every issue in the same file within `window`
/// lines of its span. Sorted by comment id, issue line, then issue index.
inline std::vector<SonarMatch> match_sonar(const std::vector<Artifact>& comments, const std::vector<SonarIssue>& issues,
                                           std::uint32_t window = 2) {
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> by_file;
    for (std::size_t i = 0; i < issues.size(); ++i)
        by_file[{issues[i].repo.identifier(), issues[i].file_path}].push_back(i);
    for (auto& [_, idx] : by_file)
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) {
            return std::tie(issues[a].line, a) < std::tie(issues[b].line, b);
        });

    std::vector<SonarMatch> out;
    for (const auto& c : comments) {
        if (!c.file_path || !c.start_line) continue;
        auto it = by_file.find({c.repo.identifier(), *c.file_path});
        if (it == by_file.end()) continue;
        const auto start = *c.start_line, end = c.end_line.value_or(start);
        const auto lo = start > window ? start - window : 0u;
        auto first = std::lower_bound(it->second.begin(), it->second.end(), lo,
                                      [&](std::size_t i, std::uint32_t v) { return issues[i].line < v; });
        for (auto p = first; p != it->second.end() && issues[*p].line <= end + window; ++p)
            out.push_back({c.id, *p, issues[*p].line, line_distance(issues[*p].line, start, end)});
    }
    std::sort(out.begin(), out.end(), [](const SonarMatch& a, const SonarMatch& b) {
        return std::tie(a.comment_id, a.issue_line, a.issue_index) < std::tie(b.comment_id, b.issue_line, b.issue_index);
    });
    return out;
}

struct SeverityGroup {
    Severity severity = Severity::Info;
    stats::Summary summary;
};

struct AlignmentReport {
    std::size_t n = 0;
    std::optional<stats::Correlation> pearson;
    std::optional<stats::Correlation> spearman;
    /// Set when a correlation is undefined because a series is constant.
    bool degenerate = false;
    std::vector<SeverityGroup> groups;  // severities with at least one match, ascending
};

/// Correlation of priority score against the severity ordinal, plus the
/// per-severity score distribution.
inline AlignmentReport severity_alignment(const std::vector<std::pair<Severity, double>>& scored) {
    if (scored.size() < 3) throw Error(ErrorCode::InsufficientData, "severity alignment needs at least 3 matches");
    AlignmentReport r;
    r.n = scored.size();
    std::vector<double> sev, score;
    std::map<Severity, std::vector<double>> groups;
    for (const auto& [s, v] : scored) {
        sev.push_back(static_cast<double>(static_cast<int>(s)));
        score.push_back(v);
        groups[s].push_back(v);
    }
    try {
        r.pearson = stats::pearson(score, sev);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateInput) throw;
        r.degenerate = true;
    }
    try {
        r.spearman = stats::spearman(score, sev);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateInput) throw;
        r.degenerate = true;
    }
    for (const auto& [s, vals] : groups) r.groups.push_back({s, stats::summarize(vals)});
    return r;
}

// ---------------------------------------------------------------------------
// Subprocess embedding provider

/// Talks to a child that reads `{id, text}` lines and answers with
/// `{id, vector}` lines, one per request, in any order. Requests are fed
/// from a writer thread so a chatty child can never fill both pipes.
class SubprocessProvider {
public:
    explicit SubprocessProvider(std::vector<std::string> argv) : argv_(std::move(argv)) {
        if (argv_.empty()) throw Error(ErrorCode::Config, "embedding provider command is empty");
    }

    EmbeddingSet embed(const std::vector<std::pair<std::string, std::string>>& requests) {
        std::unordered_set<std::string> pending;
        for (const auto& [id, _] : requests)
            if (!pending.insert(id).second) throw Error(ErrorCode::ProviderFailure, "duplicate request id " + id);

        EmbeddingSet out;
        Subprocess child(argv_);
        std::thread writer([&] {
            for (const auto& [id, text] : requests)
                if (!child.write(Json{{"id", id}, {"text", sanitize_utf8(text)}}.dump() + "\n")) break;
            child.close_stdin();
        });
        struct Join {
            std::thread& t;
            ~Join() {
                if (t.joinable()) t.join();
            }
        } join{writer};

        while (!pending.empty()) {
            auto line = child.read_line();
            if (!line) throw Error(ErrorCode::ProviderFailure, "provider exited with requests outstanding");
            Json j;
            try {
                j = Json::parse(*line);
            } catch (const Json::parse_error&) {
                throw Error(ErrorCode::ProviderFailure, "provider sent malformed JSON");
            }
            if (!j.contains("id") || !j.contains("vector"))
                throw Error(ErrorCode::ProviderFailure, "provider response lacks id or vector");
            const auto id = j.at("id").get<std::string>();
            if (!pending.erase(id)) throw Error(ErrorCode::ProviderFailure, "unexpected response id " + id);
            try {
                out.add(id, j.at("vector").get<Vector>());
            } catch (const Json::exception&) {
                throw Error(ErrorCode::ProviderFailure, "bad vector for " + id);
            }
        }
        writer.join();
        child.wait();
        return out;
    }

private:
    std::vector<std::string> argv_;
};

inline std::string term_key(const std::string& term) { return "term:" + term; }

} // namespace satd::priority
