"""Commit history extraction and per-commit size measurement.

The analysed history is the first-parent chain of one branch, oldest
first.  Sizes are measured by reading tree and blob objects straight from
the object database, so the working tree is never touched.  Uses
subprocess for git commands (not a git library).
"""

from __future__ import annotations

import logging
import os
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import jsonio
from .errors import EmptyRepository, NotARepository, TreeReadError, UnknownBranch
from .loc_counter import FileFilter, count_file, extension_of, is_binary

logger = logging.getLogger(__name__)

COMMITS_SCHEMA = "repo-pulse/commits/1"

_GIT_ENV = {**os.environ, "LC_ALL": "C", "GIT_TERMINAL_PROMPT": "0"}
_FIELD_SEP = "\x1f"
_LOG_FORMAT = _FIELD_SEP.join(["%H", "%P", "%aN", "%aE", "%at", "%ct"])


@dataclass(frozen=True)
class ChainCommit:
    hash: str
    parent_hash: str
    author_name: str
    author_email: str
    authored_at: int
    committed_at: int
    effective_at: int


@dataclass(frozen=True)
class CommitRecord:
    hash: str
    parent_hash: str
    author_name: str
    author_email: str
    authored_at: int
    committed_at: int
    effective_at: int
    loc: int
    kloc: float
    dkloc: float

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, raw: dict) -> CommitRecord:
        return cls(
            hash=raw["hash"],
            parent_hash=raw["parent_hash"],
            author_name=raw["author_name"],
            author_email=raw["author_email"],
            authored_at=int(raw["authored_at"]),
            committed_at=int(raw["committed_at"]),
            effective_at=int(raw["effective_at"]),
            loc=int(raw["loc"]),
            kloc=float(raw["kloc"]),
            dkloc=float(raw["dkloc"]),
        )


def author_key(commit: ChainCommit | CommitRecord) -> str:
    """Identity used for counting developers: email, else name, lowercased."""
    return commit.author_email.lower() or commit.author_name.lower()


def _git(repo: Path, *args: str) -> subprocess.CompletedProcess[bytes]:
    return subprocess.run(
        ["git", "-C", str(repo), "-c", "log.showSignature=false", *args],
        capture_output=True,
        env=_GIT_ENV,
    )


def _check_repository(repo: Path) -> None:
    if not repo.is_dir():
        raise NotARepository(f"{repo}: no such directory")
    res = _git(repo, "rev-parse", "--git-dir")
    if res.returncode != 0:
        raise NotARepository(f"{repo}: not a git repository")
    res = _git(repo, "rev-list", "--all", "--max-count=1")
    if res.returncode != 0 or not res.stdout.strip():
        raise EmptyRepository(f"{repo}: repository has no commits")


def resolve_branch(repo_path: str | os.PathLike, branch: str | None) -> str:
    """Name of the branch to analyse; ``None`` means the repository's HEAD branch."""
    repo = Path(repo_path)
    _check_repository(repo)
    if branch is None:
        res = _git(repo, "symbolic-ref", "--quiet", "--short", "HEAD")
        branch = res.stdout.decode().strip() if res.returncode == 0 else "HEAD"
    res = _git(repo, "rev-parse", "--verify", "--quiet", f"{branch}^{{commit}}")
    if res.returncode != 0:
        raise UnknownBranch(f"{repo}: unknown branch {branch!r}")
    return branch


def walk_commits(repo_path: str | os.PathLike, branch: str | None = None) -> list[ChainCommit]:
    """First-parent chain from the root to the tip of ``branch``, oldest first."""
    repo = Path(repo_path)
    branch = resolve_branch(repo, branch)
    res = _git(
        repo, "log", "--first-parent", "--reverse", "--no-color", "-z",
        f"--format={_LOG_FORMAT}", f"{branch}^{{commit}}", "--",
    )  # fmt: skip
    if res.returncode != 0:
        raise UnknownBranch(f"{repo}: cannot read history of {branch!r}: {res.stderr.decode().strip()}")

    chain: list[ChainCommit] = []
    effective = None
    for entry in res.stdout.decode("utf-8", errors="replace").split("\0"):
        entry = entry.strip("\n")
        if not entry:
            continue
        sha, parents, name, email, authored, committed = entry.split(_FIELD_SEP)
        committed_at = int(committed)
        effective = committed_at if effective is None else max(effective, committed_at)
        chain.append(
            ChainCommit(
                hash=sha,
                parent_hash=parents.split()[0] if parents else "",
                author_name=name,
                author_email=email.lower(),
                authored_at=int(authored),
                committed_at=committed_at,
                effective_at=effective,
            )
        )
    if not chain:
        raise EmptyRepository(f"{repo}: branch {branch!r} has no commits")
    return chain


# (path, blob sha, size) for the files of one commit that pass the path/size filter
_TreeListing = list[tuple[str, str, int]]


def _list_tree(repo: Path, commit: str, file_filter: FileFilter) -> _TreeListing:
    res = _git(repo, "ls-tree", "-r", "-l", "-z", "--full-tree", commit)
    if res.returncode != 0:
        raise TreeReadError(f"{commit}: {res.stderr.decode(errors='replace').strip()}")
    files = []
    for entry in res.stdout.split(b"\0"):
        if not entry:
            continue
        meta, _, raw_path = entry.partition(b"\t")
        mode, kind, sha, size = meta.split()
        # skip submodules and symlinks
        if kind != b"blob" or mode == b"120000":
            continue
        path = raw_path.decode("utf-8", errors="surrogateescape")
        if not size.isdigit():
            # ls-tree prints "BAD" when the blob object is missing
            raise TreeReadError(f"{commit}: unreadable blob {sha.decode()} ({path})")
        size_i = int(size)
        if file_filter.accepts(path, size_i):
            files.append((path, sha.decode(), size_i))
    return files


def _read_blobs(repo: Path, shas: Sequence[str]) -> Iterable[tuple[str, bytes | None]]:
    """Stream ``(sha, content)`` pairs via one ``git cat-file --batch``; ``None`` marks a missing object."""
    if not shas:
        return
    proc = subprocess.Popen(
        ["git", "-C", str(repo), "cat-file", "--batch"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.DEVNULL,
        env=_GIT_ENV,
    )

    def feed() -> None:
        try:
            for sha in shas:
                proc.stdin.write(sha.encode() + b"\n")
        except BrokenPipeError:
            pass
        finally:
            try:
                proc.stdin.close()
            except BrokenPipeError:
                pass

    writer = threading.Thread(target=feed, daemon=True)
    writer.start()
    try:
        for sha in shas:
            header = proc.stdout.readline()
            if not header:
                raise TreeReadError(f"git cat-file ended early before {sha}")
            parts = header.split()
            if len(parts) < 3 or parts[1] == b"missing":
                yield sha, None
                continue
            size = int(parts[2])
            content = proc.stdout.read(size)
            proc.stdout.read(1)
            yield sha, content
    finally:
        writer.join()
        proc.stdout.close()
        proc.wait()


def measure_chain(
    chain: Sequence[ChainCommit],
    repo_path: str | os.PathLike,
    file_filter: FileFilter,
    workers: int | None = None,
) -> list[CommitRecord]:
    """Attach LOC/KLOC/DKLOC to every commit of ``chain``.

    Each distinct blob is read and counted once; commits whose tree or
    blobs cannot be read are skipped with a warning, except the root,
    whose loss fails the stage.
    """
    repo = Path(repo_path)
    if not chain:
        return []
    workers = workers or min(8, os.cpu_count() or 1)

    def listing(commit: ChainCommit) -> _TreeListing | TreeReadError:
        try:
            return _list_tree(repo, commit.hash, file_filter)
        except TreeReadError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=workers) as pool:
        listings = list(pool.map(listing, chain))

    wanted: dict[str, set[str]] = {}
    for entry in listings:
        if isinstance(entry, TreeReadError):
            continue
        for path, sha, _ in entry:
            wanted.setdefault(sha, set()).add(extension_of(path))

    code_lines: dict[tuple[str, str], int] = {}
    missing: set[str] = set()
    for sha, content in _read_blobs(repo, sorted(wanted)):
        if content is None:
            missing.add(sha)
            continue
        binary = is_binary(content)
        for ext in wanted[sha]:
            code_lines[(sha, ext)] = 0 if binary else count_file(content, ext).code

    records: list[CommitRecord] = []
    prev_loc = 0
    for idx, (commit, entry) in enumerate(zip(chain, listings)):
        if not isinstance(entry, TreeReadError):
            lost = sorted({sha for _, sha, _ in entry if sha in missing})
            if lost:
                entry = TreeReadError(f"{commit.hash}: missing blob(s) {', '.join(lost)}")
        if isinstance(entry, TreeReadError):
            if idx == 0:
                raise TreeReadError(f"root commit unreadable: {entry}")
            logger.warning("skipping commit %s: %s", commit.hash, entry)
            continue
        loc = sum(code_lines[(sha, extension_of(path))] for path, sha, _ in entry)
        records.append(
            CommitRecord(
                **asdict(commit),
                loc=loc,
                kloc=loc / 1000,
                # same value as kloc - previous kloc, without the extra rounding step
                dkloc=(loc - prev_loc) / 1000,
            )
        )
        prev_loc = loc
    return records


def commits_document(repo: str, branch: str, records: Sequence[CommitRecord]) -> dict:
    return {
        "schema": COMMITS_SCHEMA,
        "repo": repo,
        "branch": branch,
        "records": [r.to_json() for r in records],
    }


def write_commits(path, repo: str, branch: str, records: Sequence[CommitRecord]) -> Path:
    return jsonio.write_json(path, commits_document(repo, branch, records))


def read_commits(path) -> tuple[dict, list[CommitRecord]]:
    doc = jsonio.read_json(path, COMMITS_SCHEMA, producer="extract-commits")
    meta = {k: v for k, v in doc.items() if k != "records"}
    return meta, [CommitRecord.from_json(r) for r in doc.get("records", [])]
