#!/usr/bin/env python3
"""Writes the mixed-language extraction fixture and its hand-annotated golden spans.

Each entry: (path, content, [(start_line, end_line, kind, text), ...]).
The expected spans are written by hand next to the content; they are not
produced by the extractor.
"""
import json, os, sys

FILES = [
 ("c/simple.c", "int x; // TODO fix\n", [(1,1,"Line","TODO fix")]),
 ("c/string.c", 's = "// not a comment";\n', []),
 ("c/block.c", "/* header\n * more\n */\nint main() { return 0; }\n", [(1,3,"Block","header\n * more")]),
 ("c/merge.c", "// first\n// second\nint y;\n// third\n", [(1,2,"Line","first\nsecond"),(4,4,"Line","third")]),
 ("c/blank_breaks.c", "// a\n\n// b\n", [(1,1,"Line","a"),(3,3,"Line","b")]),
 ("c/char_lit.c", "char q = '\"'; // quote char\nchar *s = \"/* no */\";\n", [(1,1,"Line","quote char")]),
 ("c/escaped.c", 'const char* p = "a\\"b // c";\n/* real */\n', [(2,2,"Block","real")]),
 ("c/inline_block.c", "int a = 1; /* trailing */ int b = 2;\n", [(1,1,"Block","trailing")]),
 ("c/unbalanced.c", "int z;\n/* never closed\nint w;\n", [(2,3,"Block","never closed\nint w;")]),
 ("c/empty_comment.c", "//\n/**/\nint k;\n", []),
 ("cpp/solver.cpp", "#include <vector>\n// FIXME: hack around the solver\nvoid f() {\n  int n = 0; // count\n}\n", [(2,2,"Line","FIXME: hack around the solver"),(4,4,"Line","count")]),
 ("cpp/doc.hpp", "/**\n * Returns the sum.\n */\nint sum(int a, int b);\n", [(1,3,"Block","*\n * Returns the sum.")]),
 ("cpp/url.cc", 'auto u = "http://example.com"; // url above\n', [(1,1,"Line","url above")]),
 ("cpp/mixed.cxx", "/* a */ // b\n", [(1,1,"Block","a"),(1,1,"Line","b")]),
 ("cpp/trailing_then_own.cpp", "int a; // x\n// y\n", [(1,2,"Line","x\ny")]),
 ("cpp/kernel.cu", "__global__ void k() {\n  // XXX workaround for driver bug\n}\n", [(2,2,"Line","XXX workaround for driver bug")]),
 ("cpp/crlf.cpp", "int a; // windows\r\nint b;\r\n", [(1,1,"Line","windows")]),
 ("cpp/nested_like.hpp", "/* outer /* inner */ int v;\n", [(1,1,"Block","outer /* inner")]),
 ("cpp/division.cpp", "int r = a / b; int s = c/d; // ratio\n", [(1,1,"Line","ratio")]),
 ("cpp/no_comments.cpp", "int main() {\n  return 0;\n}\n", []),
 ("py/setup.py", "# build script\nimport os  # os module\n", [(1,1,"Line","build script"),(2,2,"Line","os module")]),
 ("py/docstring.py", 'def f():\n    """Docstring with # hash"""\n    return 1  # one\n', [(3,3,"Line","one")]),
 ("py/strings.py", "s = '# not'\nt = \"# nope\"  # yes\n", [(2,2,"Line","yes")]),
 ("py/triple.py", "x = '''\n# inside\n'''\n# outside\n", [(4,4,"Line","outside")]),
 ("py/run.py", "#!/usr/bin/env python3\n# -*- coding: utf-8 -*-\n\nprint(1)\n", [(1,2,"Line","!/usr/bin/env python3\n-*- coding: utf-8 -*-")]),
 ("py/escape.py", "s = 'it\\'s # fine'  # real\n", [(1,1,"Line","real")]),
 ("sh/build.sh", "#!/bin/sh\necho \"# not\" # note\n", [(1,1,"Line","!/bin/sh"),(2,2,"Line","note")]),
 ("sh/param.sh", "n=${#arr[@]} # length\n", [(1,1,"Line","length")]),
 ("sh/quotes.sh", "echo 'a # b'\n  # indented\n", [(2,2,"Line","indented")]),
 ("sh/heredoc_like.bash", "x=1;# tight\n", [(1,1,"Line","tight")]),
 ("cmake/CMakeLists.txt", "# top\nproject(x) # name\nset(V \"#notcomment\")\n", [(1,1,"Line","top"),(2,2,"Line","name")]),
 ("cmake/mod.cmake", "#[[ block\ncomment ]]\nset(A 1)\n", [(1,2,"Block","block\ncomment")]),
 ("cmake/sub/CMakeLists.txt", "add_library(y y.c)\n", []),
 ("f/solver.f90", "program p\n  ! TODO: approximation\n  x = 1.0 ! init\nend program\n", [(2,2,"Line","TODO: approximation"),(3,3,"Line","init")]),
 ("f/str.f90", "print *, 'Hello ! world' ! greet\n", [(1,1,"Line","greet")]),
 ("f/legacy.f", "      x = 2\n! old style\n! continues\n", [(2,3,"Line","old style\ncontinues")]),
 ("f/doubled.f95", "s = 'it''s' ! apostrophe\n", [(1,1,"Line","apostrophe")]),
 ("misc/README.md", "# Heading\nText\n", None),
 ("misc/data.bin", "\x00\x01", None),
 ("misc/deep/a/b/util.h", "#pragma once\n/// helper\n", [(2,2,"Line","/ helper")]),
]

def main(out_dir, golden_path):
    assert len(FILES) == 40, len(FILES)
    golden = []
    for path, content, spans in FILES:
        full = os.path.join(out_dir, path)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        with open(full, "w", newline="") as f:
            f.write(content)
        for (s, e, kind, text) in (spans or []):
            golden.append({"file_path": path, "start_line": s, "end_line": e, "kind": kind, "text": text})
    golden.sort(key=lambda g: (g["file_path"],))
    with open(golden_path, "w") as f:
        for g in golden:
            f.write(json.dumps(g, sort_keys=True) + "\n")

if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
