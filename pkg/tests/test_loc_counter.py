from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repo_pulse.loc_counter import (
    FileFilter,
    LineCount,
    count_file,
    count_tree,
    extension_of,
    is_binary,
)

FIXTURES = Path(__file__).parent / "fixtures" / "loc"

# Hand counts of the files under fixtures/loc (line-by-line annotation in
# tests/fixtures/loc/HAND_COUNTS.md).
HAND_COUNTS = {
    "sample.c": LineCount(code=8, comment=8, blank=4),
    "sample.py": LineCount(code=5, comment=3, blank=3),
    "sample.html": LineCount(code=4, comment=4, blank=1),
    "sample.lua": LineCount(code=2, comment=1, blank=1),
    "notes.txt": LineCount(code=3, comment=0, blank=1),
}

# smallest valid PNG (1x1 greyscale)
PNG_1x1 = bytes.fromhex(
    "89504e470d0a1a0a0000000d49484452000000010000000108000000003a7e9b55"
    "0000000a49444154789c636000000002000148afa4710000000049454e44ae426082"
)


@pytest.mark.parametrize("name", sorted(HAND_COUNTS))
def test_fixture_files_match_hand_counts(name):
    content = (FIXTURES / name).read_bytes()
    assert count_file(content, extension_of(name)) == HAND_COUNTS[name]


def test_one_of_each_category():
    assert count_file(b"a=1\n\n# hi\n", "py") == LineCount(code=1, comment=1, blank=1)


def test_empty_content():
    assert count_file(b"", "c") == LineCount(0, 0, 0)


def test_missing_trailing_newline_still_counts_last_line():
    assert count_file(b"x\ny", "txt") == LineCount(code=2, comment=0, blank=0)


def test_crlf_line_endings():
    assert count_file(b"int x;\r\n\r\n// c\r\n", "c") == LineCount(code=1, comment=1, blank=1)


def test_blank_line_inside_block_comment_is_blank():
    assert count_file(b"/*\n   \n*/\n", "c") == LineCount(code=0, comment=2, blank=1)


def test_string_literals_are_not_parsed():
    # documented inaccuracy: "/*" inside a string opens a comment
    src = b's = "/*";\nint x = 1;\n'
    assert count_file(src, "c") == LineCount(code=1, comment=1, blank=0)


def test_code_after_block_close_on_same_line_is_code():
    assert count_file(b"/* a\n b */ int y;\n", "cpp") == LineCount(code=1, comment=1, blank=0)


def test_unknown_extension_has_no_comments():
    assert count_file(b"// x\n# y\n\nz\n", "weird") == LineCount(code=3, comment=0, blank=1)


def test_invalid_utf8_is_counted_lossily():
    assert count_file(b"\xff\xfe code\n", "txt").code == 1


def test_extension_of():
    assert extension_of("src/Main.CPP") == "cpp"
    assert extension_of("Makefile") == ""
    assert extension_of("a.tar.gz") == "gz"
    assert extension_of(".bashrc") == ""


@pytest.mark.parametrize(
    "content, expected",
    [
        (b"\x00", True),
        (b"plain ascii text\n", False),
        (PNG_1x1, True),
        (b"a" * 8000 + b"\x00", False),
        (b"a" * 7999 + b"\x00", True),
        (b"", False),
    ],
)
def test_is_binary(content, expected):
    assert is_binary(content) is expected


def test_png_header_has_nul_within_first_bytes():
    assert b"\x00" in PNG_1x1[:16]


def test_count_tree_additivity():
    tree = [("a.py", b"x = 1\n" * 10), ("b.py", b"y = 2\n" * 5)]
    assert count_tree(tree, FileFilter()) == 15


def test_count_tree_default_excludes():
    tree = [("a.py", b"x = 1\n" * 10), ("node_modules/b.js", b"y;\n" * 5)]
    assert count_tree(tree, FileFilter()) == 10


def test_count_tree_mixed_fixture():
    tree = [(name, (FIXTURES / name).read_bytes()) for name in sorted(HAND_COUNTS)]
    tree += [
        ("img/logo.png", PNG_1x1),
        ("vendor/lib.c", (FIXTURES / "sample.c").read_bytes()),
        ("dist/bundle.js", b"a;\nb;\n"),
        (".git/config", b"[core]\n"),
        ("huge.txt", b"line\n" * 300_000),
    ]
    expected = sum(c.code for c in HAND_COUNTS.values())  # 8+5+4+2+3
    assert expected == 22
    assert count_tree(tree, FileFilter()) == expected
    assert count_tree(reversed(tree), FileFilter()) == expected


def test_filter_size_cap_and_globs():
    f = FileFilter(include_globs=("src/**",), exclude_globs=("**/*_test.go",), max_file_bytes=10)
    assert f.accepts_path("src/a/b.go")
    assert not f.accepts_path("docs/a.go")
    assert not f.accepts_path("src/x_test.go")
    assert f.accepts("src/a.go", 10)
    assert not f.accepts("src/a.go", 11)


@pytest.mark.parametrize(
    "pattern, path, expected",
    [
        ("**/*", "a", True),
        ("**/*", "a/b/c.txt", True),
        ("*.py", "a.py", True),
        ("*.py", "pkg/a.py", False),
        ("**/*.py", "pkg/a.py", True),
        ("node_modules/**", "node_modules/x/y.js", True),
        ("node_modules/**", "src/node_modules/y.js", False),
        ("src/?.c", "src/a.c", True),
        ("src/?.c", "src/ab.c", False),
        ("a/**/z", "a/z", True),
        ("a/**/z", "a/b/c/z", True),
    ],
)
def test_glob_semantics(pattern, path, expected):
    f = FileFilter(include_globs=(pattern,), exclude_globs=())
    assert f.accepts_path(path) is expected


def _physical_lines(data: bytes) -> int:
    # independent count: number of "\n"-terminated lines plus an unterminated tail
    return data.count(b"\n") + (0 if data == b"" or data.endswith(b"\n") else 1)


_line_pieces = st.sampled_from(
    ["", " ", "\t", "code()", "x = 1", "//", "/*", "*/", "#", "--", "<!--", "-->", "a /* b */ c", "é", "\r"]
)
_text = st.lists(st.lists(_line_pieces, max_size=4).map("".join), max_size=30).map("\n".join)
_exts = st.sampled_from(["c", "py", "lua", "html", "txt", "rs", "yaml", ""])


@settings(max_examples=1000, deadline=None)
@given(_text, _exts)
def test_partition_invariant(text, ext):
    data = text.encode("utf-8")
    lc = count_file(data, ext)
    assert lc.code + lc.comment + lc.blank == _physical_lines(data)
    assert min(lc.code, lc.comment, lc.blank) >= 0
    assert count_file(data, ext) == lc


@settings(max_examples=300, deadline=None)
@given(_text, _exts)
def test_appending_code_line_increments_code(text, ext):
    data = text.encode("utf-8")
    if data and not data.endswith(b"\n"):
        data += b"\n"
    # only meaningful outside an open block comment
    closed = data + b"*/ -->\n" if ext in {"c", "rs", "html"} else data
    before = count_file(closed, ext)
    after = count_file(closed + b"value = 42\n", ext)
    assert after.code == before.code + 1
    assert (after.comment, after.blank) == (before.comment, before.blank)


_segment = st.sampled_from(["src", "node_modules", "vendor", "dist", "third_party", ".git", "lib", "a"])
_paths = st.lists(
    st.lists(_segment, min_size=0, max_size=3).map(lambda parts: "/".join([*parts, "f.c"])),
    min_size=1,
    max_size=20,
)


@settings(max_examples=200, deadline=None)
@given(_paths)
def test_filter_soundness(paths):
    f = FileFilter()
    tree = [(p, b"int x;\n") for p in paths]
    excluded_roots = ("node_modules/", "vendor/", "dist/", "third_party/", ".git/")
    expected = sum(1 for p in paths if not p.startswith(excluded_roots))
    assert count_tree(tree, f) == expected
    for p in paths:
        if p.startswith(excluded_roots):
            assert not f.accepts_path(p)
