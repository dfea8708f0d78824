"""Source line counting.

Lines are classified as blank, comment, or code using a small built-in
table of comment syntaxes keyed by file extension.  Block comments are
tracked with a single-pass state machine that does not parse string
literals, so a ``/*`` inside a string opens a comment.  That inaccuracy
is accepted in exchange for rules that are fully specified.

Only ``code`` lines feed the size metrics.
"""

from __future__ import annotations

import posixpath
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, NamedTuple

BINARY_SNIFF_BYTES = 8000


class LineCount(NamedTuple):
    code: int
    comment: int
    blank: int


@dataclass(frozen=True)
class CommentSyntax:
    line: tuple[str, ...] = ()
    block: tuple[tuple[str, str], ...] = ()


_C_STYLE = CommentSyntax(line=("//",), block=(("/*", "*/"),))
_HASH = CommentSyntax(line=("#",))

COMMENT_SYNTAX: dict[str, CommentSyntax] = {
    **dict.fromkeys(("c", "cc", "cpp", "h", "hpp", "rs", "go", "java", "js", "ts"), _C_STYLE),
    **dict.fromkeys(("py", "rb", "sh", "yaml", "yml", "toml"), _HASH),
    "lua": CommentSyntax(line=("--",)),
    **dict.fromkeys(("html", "xml"), CommentSyntax(block=(("<!--", "-->"),))),
}

_NO_COMMENTS = CommentSyntax()


def extension_of(path: str) -> str:
    """Lowercased extension without the dot; dotfiles have none."""
    name = posixpath.basename(path)
    stem, dot, ext = name.rpartition(".")
    if not dot or not stem:
        return ""
    return ext.lower()


def is_binary(content: bytes) -> bool:
    return b"\x00" in content[:BINARY_SNIFF_BYTES]


def _split_lines(text: str) -> list[str]:
    if not text:
        return []
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    return lines


def _classify(line: str, syntax: CommentSyntax, in_block: str | None) -> tuple[bool, str | None]:
    """Scan one non-blank line.

    Returns ``(has_code, open_block_terminator)``; the second value is the
    terminator still awaited when the line ends inside a block comment.
    """
    pos = 0
    n = len(line)
    has_code = False
    while pos < n:
        if in_block is not None:
            end = line.find(in_block, pos)
            if end < 0:
                return has_code, in_block
            pos = end + len(in_block)
            in_block = None
            continue
        if line[pos].isspace():
            pos += 1
            continue
        if any(line.startswith(tok, pos) for tok in syntax.line):
            return has_code, None
        for opener, closer in syntax.block:
            if line.startswith(opener, pos):
                in_block = closer
                pos += len(opener)
                break
        else:
            has_code = True
            pos += 1
    return has_code, in_block


def count_file(content: bytes, extension: str) -> LineCount:
    syntax = COMMENT_SYNTAX.get(extension.lower(), _NO_COMMENTS)
    text = content.decode("utf-8", errors="replace")
    code = comment = blank = 0
    in_block: str | None = None
    for line in _split_lines(text):
        if not line.strip():
            blank += 1
            continue
        has_code, in_block = _classify(line, syntax, in_block)
        if has_code:
            code += 1
        else:
            comment += 1
    return LineCount(code, comment, blank)


@lru_cache(maxsize=256)
def _glob_regex(pattern: str) -> re.Pattern[str]:
    """Translate a path glob to a regex anchored at the repository root.

    ``*`` and ``?`` never cross ``/``; ``**/`` matches zero or more
    directories and a trailing ``**`` matches everything below.
    """
    out = []
    i = 0
    while i < len(pattern):
        if pattern.startswith("**/", i):
            out.append("(?:.*/)?")
            i += 3
        elif pattern.startswith("**", i):
            out.append(".*")
            i += 2
        elif pattern[i] == "*":
            out.append("[^/]*")
            i += 1
        elif pattern[i] == "?":
            out.append("[^/]")
            i += 1
        else:
            out.append(re.escape(pattern[i]))
            i += 1
    return re.compile("".join(out), re.DOTALL)


def _matches_any(path: str, patterns: Iterable[str]) -> bool:
    return any(_glob_regex(p).fullmatch(path) for p in patterns)


DEFAULT_INCLUDE = ("**/*",)
DEFAULT_EXCLUDE = (".git/**", "node_modules/**", "vendor/**", "dist/**", "third_party/**")
DEFAULT_MAX_FILE_BYTES = 1_048_576


@dataclass(frozen=True)
class FileFilter:
    include_globs: tuple[str, ...] = DEFAULT_INCLUDE
    exclude_globs: tuple[str, ...] = DEFAULT_EXCLUDE
    max_file_bytes: int = DEFAULT_MAX_FILE_BYTES
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "include_globs", tuple(self.include_globs))
        object.__setattr__(self, "exclude_globs", tuple(self.exclude_globs))

    def accepts_path(self, path: str) -> bool:
        hit = self._cache.get(path)
        if hit is None:
            hit = _matches_any(path, self.include_globs) and not _matches_any(path, self.exclude_globs)
            self._cache[path] = hit
        return hit

    def accepts(self, path: str, size: int) -> bool:
        """Path and size checks; binary content is checked separately."""
        return size <= self.max_file_bytes and self.accepts_path(path)


def count_tree(tree: Iterable[tuple[str, bytes]], filter: FileFilter) -> int:
    """Total code lines over the files of ``tree`` that pass ``filter``."""
    total = 0
    for path, content in tree:
        if not filter.accepts(path, len(content)) or is_binary(content):
            continue
        total += count_file(content, extension_of(path)).code
    return total
