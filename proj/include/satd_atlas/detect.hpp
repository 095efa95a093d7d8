#pragma once

#include "satd_atlas/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace satd::detect {

/// Lowercase word tokens: runs of ASCII alphanumerics, `_`, and non-ASCII bytes.
inline std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c == '_' || c >= 0x80) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

/// Number of occurrences of `phrase` (as a contiguous token sequence) in `tokens`.
inline std::size_t count_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
    if (phrase.empty() || phrase.size() > tokens.size()) return 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i)
        if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) ++hits;
    return hits;
}

struct PatternConfig {
    /// Phrases matched on word boundaries, case-insensitive. A `re:` prefix
    /// marks an ECMAScript regex applied to the lowercased text instead.
    std::vector<std::string> satd_patterns;
    std::map<SatdClass, std::vector<std::string>> class_keyword_sets;
    std::vector<SatdClass> precedence;

    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        for (auto c : kDebtClasses) {
            auto it = class_keyword_sets.find(c);
            if (it == class_keyword_sets.end() || it->second.empty())
                out.push_back("empty keyword set for " + std::string(to_string(c)));
        }
        std::set<SatdClass> seen(precedence.begin(), precedence.end());
        if (precedence.size() != 5 || seen.size() != 5 || seen.count(SatdClass::NonSATD))
            out.push_back("precedence must be a permutation of the five debt classes");
        if (satd_patterns.empty()) out.push_back("no SATD patterns");
        return out;
    }
};

inline PatternConfig default_pattern_config() {
    PatternConfig cfg;
    cfg.satd_patterns = {"todo",          "fixme",        "hack",          "xxx",
                         "workaround",    "temporary",    "kludge",        "not implemented",
                         "should be refactored", "tbd",   "not yet implemented", "needs refactoring",
                         "technical debt", "tech debt",   "quick fix",     "untested",
                         "undocumented",  "hardcoded",    "hard coded",    "not supported"};
    cfg.class_keyword_sets = {
        {SatdClass::CodeDesign,
         {"hack", "hacky", "workaround", "kludge", "refactor", "refactoring", "refactored", "cleanup", "clean up",
          "ugly", "messy", "duplicate", "duplicated", "duplication", "inefficient", "slow", "temporary", "quick fix",
          "hardcoded", "hard coded", "magic number", "redesign", "rewrite", "simplify", "deprecated", "performance"}},
        {SatdClass::Documentation,
         {"document", "documented", "documentation", "undocumented", "doc", "docs", "docstring", "comment",
          "comments", "explain", "explanation", "describe", "description", "typo", "readme", "doxygen", "clarify"}},
        {SatdClass::Test,
         {"test", "tests", "tested", "testing", "untested", "unittest", "unit test", "coverage", "flaky",
          "regression", "benchmark"}},
        {SatdClass::Requirement,
         {"implement", "implemented", "implementation", "not implemented", "unimplemented", "unsupported",
          "not supported", "support", "feature", "missing", "incomplete", "requirement", "tbd", "not yet"}},
        {SatdClass::Scientific,
         {"assume", "assumes", "assumed", "assumption", "assumptions", "approximation", "approximate",
          "approximately", "approximated", "accuracy", "accurate", "inaccurate", "precision", "numerical",
          "numerically", "tolerance", "convergence", "converge", "stability", "unstable", "instability", "physics",
          "physical", "physically", "empirical", "empirically", "heuristic", "fudge", "discretization",
          "interpolation", "extrapolation", "roundoff", "epsilon", "ill conditioned"}},
    };
    cfg.precedence = {SatdClass::CodeDesign, SatdClass::Test, SatdClass::Documentation, SatdClass::Requirement,
                      SatdClass::Scientific};
    return cfg;
}

/// Format: `{"satd_patterns":[...], "class_keywords":{"CodeDesign":[...],...}, "precedence":[...]}`.
inline PatternConfig pattern_config_from_json(const Json& j) {
    PatternConfig cfg;
    try {
        cfg.satd_patterns = j.at("satd_patterns").get<std::vector<std::string>>();
        for (const auto& [cls, words] : j.at("class_keywords").items())
            cfg.class_keyword_sets[parse_satd_class(cls)] = words.get<std::vector<std::string>>();
        for (const auto& c : j.at("precedence")) cfg.precedence.push_back(parse_satd_class(c.get<std::string>()));
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::Config, std::string("pattern config: ") + e.what());
    }
    auto problems = cfg.problems();
    if (!problems.empty()) throw Error(ErrorCode::Config, "pattern config: " + problems.front());
    return cfg;
}

inline Json to_json(const PatternConfig& cfg) {
    Json classes = Json::object();
    for (const auto& [cls, words] : cfg.class_keyword_sets) classes[std::string(to_string(cls))] = words;
    Json prec = Json::array();
    for (auto c : cfg.precedence) prec.push_back(std::string(to_string(c)));
    return Json{{"satd_patterns", cfg.satd_patterns}, {"class_keywords", classes}, {"precedence", prec}};
}

inline PatternConfig load_pattern_config(const std::filesystem::path& path) {
    try {
        return pattern_config_from_json(Json::parse(read_file(path)));
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::Config, path.string() + ": " + e.what());
    }
}

/// Compiled form of a PatternConfig; build once, classify many.
class KeywordClassifier {
public:
    explicit KeywordClassifier(PatternConfig cfg) : cfg_(std::move(cfg)) {
        auto problems = cfg_.problems();
        if (!problems.empty()) throw Error(ErrorCode::Config, problems.front());
        for (const auto& p : cfg_.satd_patterns) {
            if (p.rfind("re:", 0) == 0)
                regexes_.emplace_back(p.substr(3), std::regex::ECMAScript | std::regex::icase);
            else
                phrases_.push_back(word_tokens(p));
        }
        for (const auto& [cls, words] : cfg_.class_keyword_sets)
            for (const auto& w : words) class_phrases_[cls].push_back(word_tokens(w));
    }

    SatdLabel classify(std::string_view artifact_id, std::string_view text) const {
        const auto tokens = word_tokens(text);
        std::size_t pattern_hits = 0;
        for (const auto& ph : phrases_) pattern_hits += count_phrase(tokens, ph);
        if (!regexes_.empty()) {
            const std::string lowered = to_lower_ascii(text);
            for (const auto& re : regexes_)
                pattern_hits += static_cast<std::size_t>(
                    std::distance(std::sregex_iterator(lowered.begin(), lowered.end(), re), std::sregex_iterator()));
        }
        SatdLabel label;
        label.artifact_id = std::string(artifact_id);
        label.source = LabelSource::KeywordBaseline;
        label.confidence = static_cast<double>(pattern_hits) / static_cast<double>(pattern_hits + 1);
        if (pattern_hits == 0) {
            label.is_satd = false;
            label.satd_class = SatdClass::NonSATD;
            return label;
        }
        label.is_satd = true;
        SatdClass best = cfg_.precedence.front();
        std::size_t best_hits = 0;
        for (auto cls : cfg_.precedence) {
            std::size_t hits = 0;
            auto it = class_phrases_.find(cls);
            if (it != class_phrases_.end())
                for (const auto& ph : it->second) hits += count_phrase(tokens, ph);
            if (hits > best_hits) {
                best = cls;
                best_hits = hits;
            }
        }
        label.satd_class = best;
        return label;
    }

    const PatternConfig& config() const { return cfg_; }

private:
    PatternConfig cfg_;
    std::vector<std::vector<std::string>> phrases_;
    std::vector<std::regex> regexes_;
    std::map<SatdClass, std::vector<std::vector<std::string>>> class_phrases_;
};

inline SatdLabel classify_keyword(std::string_view text, const PatternConfig& cfg, std::string_view artifact_id = {}) {
    return KeywordClassifier(cfg).classify(artifact_id, text);
}

// ---------------------------------------------------------------------------
// Sentiment

struct Lexicon {
    std::unordered_set<std::string> positive;
    std::unordered_set<std::string> negative;
};

inline Lexicon default_lexicon() {
    Lexicon lex;
    lex.negative = {"broken",  "awful",    "bad",       "ugly",     "terrible", "horrible",      "wrong",
                    "fail",    "fails",    "failed",    "failure",  "crash",    "crashes",       "buggy",
                    "stupid",  "annoying", "mess",      "messy",    "useless",  "wtf",           "nasty",
                    "painful", "worse",    "worst",     "poor",     "dirty",    "bogus",         "silly",
                    "confusing", "broke",  "weird",     "hate",     "sadly",    "unfortunately", "horrendous",
                    "garbage", "insane",   "ridiculous", "dangerous"};
    lex.positive = {"great",   "good",      "nice",     "thanks",      "thank",     "clean",   "cleanup",
                    "improve", "improved",  "improves", "improvement", "better",    "best",    "fixed",
                    "works",   "elegant",   "correct",  "excellent",   "awesome",   "happy",   "simple",
                    "love",    "helpful",   "fine",     "resolved",    "robust",    "perfect", "neat"};
    return lex;
}

/// Text format: one word per line prefixed by `+` (positive) or `-` (negative);
/// blank lines and `#` comments are ignored.
inline Lexicon parse_lexicon(std::string_view content) {
    Lexicon lex;
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || is_space(line.back()))) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.size() < 2 || (line[0] != '+' && line[0] != '-'))
            throw Error(ErrorCode::Config, "lexicon line " + std::to_string(lineno) + ": expected +word or -word");
        (line[0] == '+' ? lex.positive : lex.negative).insert(to_lower_ascii(line.substr(1)));
    }
    return lex;
}

inline Lexicon load_lexicon(const std::filesystem::path& path) { return parse_lexicon(read_file(path)); }

inline SentimentLabel classify_sentiment_lexicon(std::string_view text, const Lexicon& lexicon,
                                                 std::string_view artifact_id = {}) {
    long balance = 0;
    for (const auto& t : word_tokens(text)) {
        if (lexicon.positive.count(t)) ++balance;
        if (lexicon.negative.count(t)) --balance;
    }
    SentimentLabel l;
    l.artifact_id = std::string(artifact_id);
    l.score = 1.0 / (1.0 + std::exp(-static_cast<double>(balance)));
    l.label = l.score < 0.5 ? Sentiment::Negative : Sentiment::NonNegative;
    l.source = LabelSource::LexiconBaseline;
    return l;
}

// ---------------------------------------------------------------------------
// Prediction import

enum class PredictionKind { Satd, Sentiment };

struct RejectRecord {
    std::size_t line = 0;
    std::string artifact_id;
    std::string reason;
};

inline Json to_json(const RejectRecord& r) {
    return Json{{"line", r.line}, {"artifact_id", r.artifact_id}, {"reason", r.reason}};
}

struct ImportResult {
    std::vector<SatdLabel> satd;
    std::vector<SentimentLabel> sentiment;
    std::vector<RejectRecord> rejects;
};

/// Reads an external prediction JSONL. Unknown artifact ids and out-of-range
/// values become reject records; unparsable lines and lines of the wrong
/// kind abort the import.
inline ImportResult import_predictions(std::istream& in, PredictionKind kind,
                                       const std::unordered_set<std::string>& known_ids,
                                       const std::string& source_name = "<predictions>") {
    ImportResult res;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error&) {
            throw Error(ErrorCode::MalformedLine, source_name + ":" + std::to_string(lineno) + ": not valid JSON");
        }
        if (!j.is_object() || !j.contains("artifact_id") || !j["artifact_id"].is_string())
            throw Error(ErrorCode::MalformedLine, source_name + ":" + std::to_string(lineno) + ": missing artifact_id");
        const auto id = j["artifact_id"].get<std::string>();
        const bool satd_shape = j.contains("is_satd");
        const bool sentiment_shape = j.contains("label") || j.contains("score");
        if ((kind == PredictionKind::Satd && !satd_shape) || (kind == PredictionKind::Sentiment && !sentiment_shape))
            throw Error(ErrorCode::SchemaMismatch, source_name + ":" + std::to_string(lineno) + ": fields do not match " +
                                                       (kind == PredictionKind::Satd ? "satd" : "sentiment") +
                                                       " predictions");
        if (!known_ids.count(id)) {
            res.rejects.push_back({lineno, id, "unknown artifact_id"});
            continue;
        }
        try {
            if (kind == PredictionKind::Satd) {
                SatdLabel l;
                l.artifact_id = id;
                l.is_satd = j.at("is_satd").get<bool>();
                l.satd_class = j.contains("satd_class") ? parse_satd_class(j["satd_class"].get<std::string>())
                                                        : (l.is_satd ? SatdClass::CodeDesign : SatdClass::NonSATD);
                l.confidence = j.value("confidence", 1.0);
                l.source = LabelSource::ExternalImport;
                if (l.is_satd == (l.satd_class == SatdClass::NonSATD)) {
                    res.rejects.push_back({lineno, id, "is_satd inconsistent with satd_class"});
                    continue;
                }
                if (!(l.confidence >= 0.0 && l.confidence <= 1.0)) {
                    res.rejects.push_back({lineno, id, "confidence outside [0,1]"});
                    continue;
                }
                res.satd.push_back(std::move(l));
            } else {
                SentimentLabel l;
                l.artifact_id = id;
                l.source = LabelSource::ExternalImport;
                if (j.contains("score")) {
                    l.score = j["score"].get<double>();
                    if (!(l.score >= 0.0 && l.score <= 1.0)) {
                        res.rejects.push_back({lineno, id, "score outside [0,1]"});
                        continue;
                    }
                }
                if (j.contains("label"))
                    l.label = parse_sentiment(j["label"].get<std::string>());
                else
                    l.label = l.score < 0.5 ? Sentiment::Negative : Sentiment::NonNegative;
                if (!j.contains("score")) l.score = l.label == Sentiment::Negative ? 0.0 : 1.0;
                res.sentiment.push_back(std::move(l));
            }
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::MalformedLine, source_name + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            if (e.code() != ErrorCode::SchemaMismatch) throw;
            throw Error(ErrorCode::MalformedLine, source_name + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return res;
}

inline ImportResult import_predictions(const std::filesystem::path& path, PredictionKind kind,
                                       const std::unordered_set<std::string>& known_ids) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return import_predictions(in, kind, known_ids, path.string());
}

/// External labels replace baseline labels for the same artifact; the
/// baseline order is kept.
template <class Label>
std::vector<Label> merge_labels(const std::vector<Label>& baseline, const std::vector<Label>& external) {
    std::unordered_map<std::string, const Label*> ext;
    for (const auto& l : external) ext[l.artifact_id] = &l;
    std::vector<Label> out;
    out.reserve(baseline.size());
    std::unordered_set<std::string> seen;
    for (const auto& l : baseline) {
        if (!seen.insert(l.artifact_id).second) continue;
        auto it = ext.find(l.artifact_id);
        out.push_back(it != ext.end() ? *it->second : l);
    }
    for (const auto& l : external)
        if (seen.insert(l.artifact_id).second) out.push_back(l);
    return out;
}

inline SatdLabel satd_label_from_json(const Json& j) {
    SatdLabel l;
    l.artifact_id = j.at("artifact_id").get<std::string>();
    l.is_satd = j.at("is_satd").get<bool>();
    l.satd_class = parse_satd_class(j.at("satd_class").get<std::string>());
    l.confidence = j.at("confidence").get<double>();
    l.source = parse_label_source(j.value("source", std::string("ExternalImport")));
    return l;
}

inline SentimentLabel sentiment_label_from_json(const Json& j) {
    SentimentLabel l;
    l.artifact_id = j.at("artifact_id").get<std::string>();
    l.label = parse_sentiment(j.at("label").get<std::string>());
    l.score = j.at("score").get<double>();
    l.source = parse_label_source(j.value("source", std::string("ExternalImport")));
    return l;
}

inline std::vector<SatdLabel> read_satd_labels(const std::filesystem::path& path) {
    std::vector<SatdLabel> out;
    read_jsonl(path, [&](const Json& j, std::size_t) { out.push_back(satd_label_from_json(j)); });
    return out;
}

inline std::vector<SentimentLabel> read_sentiment_labels(const std::filesystem::path& path) {
    std::vector<SentimentLabel> out;
    read_jsonl(path, [&](const Json& j, std::size_t) { out.push_back(sentiment_label_from_json(j)); });
    return out;
}

} // namespace satd::detect
