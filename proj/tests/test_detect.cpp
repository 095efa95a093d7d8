#include "satd_atlas/detect.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace satd;
using namespace satd::detect;

TEST(ClassifyKeyword, DefaultTableExamples) {
    const auto cfg = default_pattern_config();
    auto a = classify_keyword("TODO: temporary hack, refactor later", cfg);
    EXPECT_TRUE(a.is_satd);
    EXPECT_EQ(a.satd_class, SatdClass::CodeDesign);
    EXPECT_EQ(a.source, LabelSource::KeywordBaseline);

    auto b = classify_keyword("Returns the sum of two vectors.", cfg);
    EXPECT_FALSE(b.is_satd);
    EXPECT_EQ(b.satd_class, SatdClass::NonSATD);

    auto c = classify_keyword("FIXME we assume uniform grid; approximation breaks near boundary", cfg);
    EXPECT_TRUE(c.is_satd);
    EXPECT_EQ(c.satd_class, SatdClass::Scientific);
}

TEST(ClassifyKeyword, WordBoundariesAndPhrases) {
    const auto cfg = default_pattern_config();
    EXPECT_FALSE(classify_keyword("the mastodon hackathon", cfg).is_satd);
    EXPECT_TRUE(classify_keyword("Feature not implemented yet", cfg).is_satd);
    EXPECT_EQ(classify_keyword("Feature not implemented yet", cfg).satd_class, SatdClass::Requirement);
    EXPECT_EQ(classify_keyword("TODO add unit tests for this path", cfg).satd_class, SatdClass::Test);
    EXPECT_EQ(classify_keyword("TODO: document the parameters", cfg).satd_class, SatdClass::Documentation);
}

TEST(ClassifyKeyword, TiesResolveByPrecedence) {
    // one CodeDesign hit (hack) and one Test hit (test)
    EXPECT_EQ(classify_keyword("TODO hack this test", default_pattern_config()).satd_class, SatdClass::CodeDesign);
    // SATD pattern but no class keyword: first in precedence
    EXPECT_EQ(classify_keyword("XXX", default_pattern_config()).satd_class, SatdClass::CodeDesign);
    auto cfg = default_pattern_config();
    cfg.precedence = {SatdClass::Test, SatdClass::CodeDesign, SatdClass::Documentation, SatdClass::Requirement,
                      SatdClass::Scientific};
    EXPECT_EQ(classify_keyword("TODO hack this test", cfg).satd_class, SatdClass::Test);
}

TEST(ClassifyKeyword, ConfidenceSaturates) {
    const auto cfg = default_pattern_config();
    double prev = 0.0;
    std::string text;
    for (int i = 0; i < 6; ++i) {
        text += " todo";
        double c = classify_keyword(text, cfg).confidence;
        EXPECT_GT(c, prev);
        EXPECT_LT(c, 1.0);
        prev = c;
    }
    EXPECT_DOUBLE_EQ(classify_keyword("nothing here", cfg).confidence, 0.0);
}

TEST(ClassifyKeyword, RegexPatterns) {
    auto cfg = default_pattern_config();
    cfg.satd_patterns = {"re:\\bto[- ]?do\\b"};
    EXPECT_TRUE(classify_keyword("To-Do: later", cfg).is_satd);
    EXPECT_FALSE(classify_keyword("today", cfg).is_satd);
}

TEST(ClassifyKeyword, CaseInsensitiveOnRandomText) {
    const auto cfg = default_pattern_config();
    KeywordClassifier clf(cfg);
    const std::vector<std::string> words = {"todo", "Fix", "hack", "the", "Test", "assume", "doc", "grid",
                                            "approximation", "not", "implemented", "XXX", "value", "."};
    std::mt19937 rng(3);
    std::uniform_int_distribution<std::size_t> n(0, 12), pick(0, words.size() - 1);
    for (int i = 0; i < 1000; ++i) {
        std::string text;
        for (std::size_t k = n(rng); k > 0; --k) text += words[pick(rng)] + " ";
        std::string upper = text;
        for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        EXPECT_EQ(clf.classify("x", text), clf.classify("x", upper)) << text;
    }
}

TEST(PatternConfig, ShippedDataFileMatchesDefaults) {
    auto loaded = load_pattern_config(std::string(SATD_DATA_DIR) + "/patterns.json");
    EXPECT_EQ(to_json(loaded), to_json(default_pattern_config()));
}

TEST(PatternConfig, InvalidConfigsRejected) {
    auto j = to_json(default_pattern_config());
    j["class_keywords"]["Test"] = Json::array();
    EXPECT_THROW(pattern_config_from_json(j), Error);
    j = to_json(default_pattern_config());
    j["precedence"] = {"CodeDesign", "CodeDesign", "Test", "Requirement", "Scientific"};
    EXPECT_THROW(pattern_config_from_json(j), Error);
}

TEST(Sentiment, LexiconExamples) {
    const auto lex = default_lexicon();
    EXPECT_EQ(classify_sentiment_lexicon("this is broken and awful", lex).label, Sentiment::Negative);
    auto empty = classify_sentiment_lexicon("", lex);
    EXPECT_EQ(empty.label, Sentiment::NonNegative);
    EXPECT_DOUBLE_EQ(empty.score, 0.5);
    EXPECT_EQ(classify_sentiment_lexicon("great cleanup, thanks", lex).label, Sentiment::NonNegative);
    auto s = classify_sentiment_lexicon("bad", lex);
    EXPECT_NEAR(s.score, 1.0 / (1.0 + std::exp(1.0)), 1e-12);
}

TEST(Sentiment, ShippedLexiconMatchesDefaults) {
    auto loaded = load_lexicon(std::string(SATD_DATA_DIR) + "/sentiment_lexicon.txt");
    auto def = default_lexicon();
    EXPECT_EQ(loaded.positive, def.positive);
    EXPECT_EQ(loaded.negative, def.negative);
    EXPECT_THROW(parse_lexicon("oops\n"), Error);
}

TEST(ImportPredictions, ValidFile) {
    std::istringstream in(R"({"artifact_id":"a","is_satd":true,"satd_class":"Test","confidence":0.9}
{"artifact_id":"b","is_satd":false,"satd_class":"NonSATD","confidence":0.8}

{"artifact_id":"c","is_satd":true,"satd_class":"Scientific","confidence":0.55}
)");
    auto r = import_predictions(in, PredictionKind::Satd, {"a", "b", "c"});
    ASSERT_EQ(r.satd.size(), 3u);
    EXPECT_TRUE(r.rejects.empty());
    for (auto& l : r.satd) EXPECT_EQ(l.source, LabelSource::ExternalImport);
    EXPECT_EQ(r.satd[2].satd_class, SatdClass::Scientific);
}

TEST(ImportPredictions, UnknownIdBecomesReject) {
    std::istringstream in(R"({"artifact_id":"a","is_satd":true,"satd_class":"Test","confidence":0.9}
{"artifact_id":"zzz","is_satd":false,"satd_class":"NonSATD","confidence":0.8}
{"artifact_id":"c","is_satd":true,"satd_class":"Scientific","confidence":0.55}
)");
    auto r = import_predictions(in, PredictionKind::Satd, {"a", "b", "c"});
    EXPECT_EQ(r.satd.size(), 2u);
    ASSERT_EQ(r.rejects.size(), 1u);
    EXPECT_EQ(r.rejects[0].line, 2u);
    EXPECT_EQ(r.rejects[0].artifact_id, "zzz");
}

TEST(ImportPredictions, MalformedAndMismatchedLines) {
    std::istringstream bad("{\"artifact_id\":\"a\",\"is_satd\":true}\n{not json\n");
    try {
        import_predictions(bad, PredictionKind::Satd, {"a"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
    }
    std::istringstream wrong_kind("{\"artifact_id\":\"a\",\"label\":\"Negative\",\"score\":0.1}\n");
    try {
        import_predictions(wrong_kind, PredictionKind::Satd, {"a"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SchemaMismatch);
    }
}

TEST(ImportPredictions, ExportedBaselineRoundTrips) {
    const std::vector<std::string> texts = {"TODO fix", "all good", "we assume ideal gas", "FIXME flaky test",
                                            "this is broken"};
    KeywordClassifier clf(default_pattern_config());
    std::vector<SatdLabel> exported;
    std::vector<SentimentLabel> exported_sent;
    std::unordered_set<std::string> ids;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        auto id = "id" + std::to_string(i);
        ids.insert(id);
        exported.push_back(clf.classify(id, texts[i]));
        exported_sent.push_back(classify_sentiment_lexicon(texts[i], default_lexicon(), id));
    }
    std::ostringstream satd_out, sent_out;
    for (auto& l : exported) satd_out << to_json(l).dump() << "\n";
    for (auto& l : exported_sent) sent_out << to_json(l).dump() << "\n";
    std::istringstream satd_in(satd_out.str()), sent_in(sent_out.str());
    auto back = import_predictions(satd_in, PredictionKind::Satd, ids);
    auto back_sent = import_predictions(sent_in, PredictionKind::Sentiment, ids);
    ASSERT_EQ(back.satd.size(), exported.size());
    for (std::size_t i = 0; i < exported.size(); ++i) {
        auto expected = exported[i];
        expected.source = LabelSource::ExternalImport;
        EXPECT_EQ(back.satd[i], expected);
        auto expected_sent = exported_sent[i];
        expected_sent.source = LabelSource::ExternalImport;
        EXPECT_EQ(back_sent.sentiment[i], expected_sent);
    }
}

TEST(MergeLabels, ExternalOverridesBaseline) {
    std::vector<SatdLabel> base = {{"a", false, SatdClass::NonSATD, 0.0, LabelSource::KeywordBaseline},
                                   {"b", true, SatdClass::Test, 0.5, LabelSource::KeywordBaseline}};
    std::vector<SatdLabel> ext = {{"a", true, SatdClass::Scientific, 0.9, LabelSource::ExternalImport}};
    auto merged = merge_labels(base, ext);
    ASSERT_EQ(merged.size(), 2u);
    EXPECT_EQ(merged[0], ext[0]);
    EXPECT_EQ(merged[1], base[1]);
    EXPECT_EQ(merge_labels(base, ext), merged);
}
