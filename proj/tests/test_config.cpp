#include "satd_atlas/config.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace satd;
using namespace satd::config;

namespace {

const char* kToml = R"(# run settings
work_dir = "out"
heuristic = "TfIdf"
bins = 1_0
include_review_comments = false

[selection]
min_commits = 5000
min_age_years = 1.5
as_of = "2023-06-01T00:00:00Z"

[provider]
command = [
  "embed", 'C:\raw',  # literal string keeps backslashes
]

[[repos]]
owner = "acme"
name = "solver"
stars = 120

[[repos]]
host = "gitlab.example"
owner = "acme"
name = "mesh"
)";

std::filesystem::path temp_dir(const std::string& name) {
    auto d = std::filesystem::temp_directory_path() / ("satd_config_" + name);
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

void write(const std::filesystem::path& p, const std::string& s) { std::ofstream(p) << s; }

} // namespace

TEST(Toml, ParsesTablesArraysAndValues) {
    const Json j = parse_toml(kToml);
    EXPECT_EQ(j["work_dir"], "out");
    EXPECT_EQ(j["bins"], 10);
    EXPECT_EQ(j["include_review_comments"], false);
    EXPECT_EQ(j["selection"]["min_commits"], 5000);
    EXPECT_DOUBLE_EQ(j["selection"]["min_age_years"].get<double>(), 1.5);
    EXPECT_EQ(j["provider"]["command"], Json::array({"embed", "C:\\raw"}));
    ASSERT_EQ(j["repos"].size(), 2u);
    EXPECT_EQ(j["repos"][1]["host"], "gitlab.example");

    const Json t = parse_toml("t = { a = 1, b.c = \"x\\u00e9\", d = [1.5, -2] }\n");
    EXPECT_EQ(t["t"]["a"], 1);
    EXPECT_EQ(t["t"]["b"]["c"], "x\xc3\xa9");
    EXPECT_EQ(t["t"]["d"], Json::array({1.5, -2}));
}

TEST(Toml, RejectsDuplicatesWithLineNumbers) {
    try {
        parse_toml("a = 1\nb = 2\na = 3\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Config);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_toml("[x]\na = 1\n[x]\nb = 2\n"), Error);
    EXPECT_THROW(parse_toml("a = \"unterminated\n"), Error);
    EXPECT_THROW(parse_toml("a = \n"), Error);
}

TEST(Config, TypedFieldsAndDefaults) {
    const auto c = config_from_json(parse_toml(kToml), "/base");
    EXPECT_EQ(c.work_dir, std::filesystem::path("/base/out"));
    EXPECT_EQ(c.cache_dir, std::filesystem::path("/base/cache"));
    EXPECT_EQ(c.heuristic, priority::Heuristic::TfIdf);
    EXPECT_FALSE(c.include_review_comments);
    EXPECT_EQ(c.max_chain_length, 4u);
    EXPECT_EQ(c.selection.min_commits, 5000u);
    EXPECT_EQ(c.selection.min_contributors, 20u);
    EXPECT_EQ(c.selection.min_stars, 40u);
    EXPECT_EQ(format_timestamp(*c.selection.as_of), "2023-06-01T00:00:00Z");
    ASSERT_EQ(c.repos.size(), 2u);
    EXPECT_EQ(c.repos[0].ref.identifier(), "github.com/acme/solver");
    EXPECT_EQ(c.repos[0].stars, 120u);
    EXPECT_FALSE(c.repos[1].stars);
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
    auto bad = [](const std::string& toml) {
        try {
            config_from_json(parse_toml(toml), "/b");
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::Config) << toml;
            return std::string(e.what());
        }
        ADD_FAILURE() << "accepted: " << toml;
        return std::string();
    };
    EXPECT_NE(bad("bnis = 3\n").find("bnis"), std::string::npos);
    EXPECT_NE(bad("[selection]\nmin_comits = 1\n").find("selection.min_comits"), std::string::npos);
    bad("bins = 0\n");
    bad("bins = -2\n");
    bad("bins = \"ten\"\n");
    bad("offline = 1\n");
    bad("max_chain_length = 5\n");
    bad("[[repos]]\nowner = \"a\"\nname = \"b\"\n[[repos]]\nowner = \"a\"\nname = \"b\"\n");
    bad("[[repos]]\nowner = \"a\"\n");
    bad("[selection]\nas_of = \"yesterday\"\n");
    EXPECT_THROW(config_from_json(parse_toml("heuristic = \"Random\"\n"), "/b"), Error);
}

TEST(Config, OverridesUseDottedKeysAndTomlValues) {
    Json j = parse_toml(kToml);
    apply_override(j, "bins", "5");
    apply_override(j, "selection.min_stars", "0");
    apply_override(j, "heuristic", "Lexical");
    apply_override(j, "offline", "true");
    apply_override(j, "provider.vectors", "vecs.jsonl");
    apply_override(j, "api_base", toml_quote("http://h/\"q\"\\"));
    const auto c = config_from_json(j, "/b");
    EXPECT_EQ(c.bins, 5u);
    EXPECT_EQ(c.selection.min_stars, 0u);
    EXPECT_EQ(c.heuristic, priority::Heuristic::Lexical);
    EXPECT_TRUE(c.offline);
    EXPECT_EQ(*c.provider.vectors, std::filesystem::path("/b/vecs.jsonl"));
    EXPECT_EQ(c.raw["bins"], 5);
    EXPECT_EQ(c.api_base, "http://h/\"q\"\\");
}

TEST(Config, LoadResolvesRelativeToFileAndChecksPaths) {
    const auto d = temp_dir("load");
    write(d / "terms.txt", "hack\n");
    write(d / "run.toml", "priority_terms = \"terms.txt\"\n");
    const auto c = load_config(d / "run.toml");
    EXPECT_EQ(*c.priority_terms, d / "terms.txt");
    EXPECT_EQ(c.work_dir, d / "work");

    write(d / "run.json", R"({"lexicon": "missing.txt"})");
    try {
        load_config(d / "run.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Config);
        EXPECT_NE(std::string(e.what()).find("missing.txt"), std::string::npos);
    }
    EXPECT_THROW(load_config(d / "absent.toml"), Error);
    std::filesystem::remove_all(d);
}
