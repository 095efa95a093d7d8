#pragma once

// Scripted repository exercising comment introduction, line shifts,
// removal, renames, text edits, duplicates and file deletion. The script
// records every SHA as it goes; the expectations below are written in
// terms of those recorded SHAs.

#include "git_fixture.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace satd::testing {

struct ExpectedLifecycle {
    std::string text;  // normalized
    std::string intro_path;
    std::uint32_t intro_line;
    std::string introduced_sha;
    std::string introduced_at;
    std::optional<std::string> removed_sha;
    std::optional<std::string> removed_at;
    std::string last_path;
};

struct LifecycleFixture {
    std::map<std::string, std::string> sha;  // step name -> SHA
    std::vector<ExpectedLifecycle> expected;
    std::size_t event_count = 0;
};

inline LifecycleFixture build_lifecycle_fixture(ScriptedRepo& repo) {
    LifecycleFixture f;
    auto& s = f.sha;

    // 1-2: two comments introduced in ref/a.c (TODO at line 3)
    repo.write("ref/a.c", "// note one\nint a;\n// TODO x\nint b;\n");
    s["A"] = repo.commit("add a.c", "2020-01-01T00:00:00Z");
    // 3: python comment; 4: unrelated edit shifts a.c lines down by two
    repo.write("src/b.py", "x = 1\n# FIXME hack\n");
    repo.write("ref/a.c", "#include <x.h>\n\n// note one\nint a;\n// TODO x\nint b;\n");
    s["B"] = repo.commit("add b.py, shift a.c", "2020-01-05T12:00:00Z");
    // 5: TODO removed
    repo.write("ref/a.c", "#include <x.h>\n\n// note one\nint a;\nint b;\n");
    s["C"] = repo.commit("resolve todo", "2020-01-11T00:00:00Z");
    // 6: rename keeps the FIXME alive
    repo.move("src/b.py", "lib/b.py");
    s["D"] = repo.commit("move b.py", "2020-02-01T00:00:00Z");
    // 7-8: text edit = removal of old identity + introduction of new one
    repo.write("lib/b.py", "x = 1\n# FIXME hack around bug\n");
    s["E"] = repo.commit("reword fixme", "2020-02-10T00:00:00Z");
    // 9: two identical comments
    repo.write("src/c.c", "// dup\nint c;\n// dup\n");
    s["F"] = repo.commit("add dups", "2020-03-01T00:00:00Z");
    // 10: one duplicate removed; the oldest instance is retired first
    repo.write("src/c.c", "int c;\n// dup\n");
    s["G"] = repo.commit("drop one dup", "2020-03-15T00:00:00Z");
    // 11: second rename
    repo.move("lib/b.py", "lib/c.py");
    s["H"] = repo.commit("rename again", "2020-04-01T00:00:00Z");
    // 12: file deleted; its comment is removed
    repo.remove("lib/c.py");
    s["I"] = repo.commit("delete c.py", "2020-04-20T06:00:00Z");
    // 13: added at head and never touched
    repo.write("ref/head.h", "/* head comment */\n");
    s["J"] = repo.commit("head", "2020-05-01T00:00:00Z");
    f.event_count = 13;

    f.expected = {
        {"note one", "ref/a.c", 1, s["A"], "2020-01-01T00:00:00Z", std::nullopt, std::nullopt, "ref/a.c"},
        {"todo x", "ref/a.c", 3, s["A"], "2020-01-01T00:00:00Z", s["C"], "2020-01-11T00:00:00Z", "ref/a.c"},
        {"fixme hack", "src/b.py", 2, s["B"], "2020-01-05T12:00:00Z", s["E"], "2020-02-10T00:00:00Z", "lib/b.py"},
        {"fixme hack around bug", "lib/b.py", 2, s["E"], "2020-02-10T00:00:00Z", s["I"], "2020-04-20T06:00:00Z",
         "lib/c.py"},
        {"dup", "src/c.c", 1, s["F"], "2020-03-01T00:00:00Z", s["G"], "2020-03-15T00:00:00Z", "src/c.c"},
        {"dup", "src/c.c", 3, s["F"], "2020-03-01T00:00:00Z", std::nullopt, std::nullopt, "src/c.c"},
        {"head comment", "ref/head.h", 1, s["J"], "2020-05-01T00:00:00Z", std::nullopt, std::nullopt, "ref/head.h"},
    };
    return f;
}

} // namespace satd::testing
