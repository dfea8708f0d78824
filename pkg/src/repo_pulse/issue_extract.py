"""Issue and pull request metadata from a host's REST issue tracker.

The client speaks the GitHub REST dialect (``/repos/{owner}/{repo}/issues``),
which returns issues and pull requests from one endpoint.  Every fetched
page is cached on disk keyed by its URL, so reruns with a warm cache make
no network requests.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import httpx

from . import jsonio
from .errors import AuthError, MalformedRecord, NetworkError, NotFound, RateLimitExhausted

logger = logging.getLogger(__name__)

ISSUES_SCHEMA = "repo-pulse/issues/1"
DEFAULT_API_URL = "https://api.github.com"
TOKEN_ENV_VARS = ("REPO_PULSE_TOKEN", "GITHUB_TOKEN")
PER_PAGE = 100
MAX_RETRIES = 5
# used when a rate-limit response names neither Retry-After nor a reset time
DEFAULT_RATE_LIMIT_WAIT = 60.0

ISSUE = "issue"
PULL_REQUEST = "pull_request"
OPEN = "open"
CLOSED = "closed"


@dataclass(frozen=True)
class IssueRecord:
    id: int
    number: int
    kind: str
    state: str
    created_at: int
    closed_at: int | None
    title: str | None = None

    @property
    def is_pull_request(self) -> bool:
        return self.kind == PULL_REQUEST

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "number": self.number,
            "kind": self.kind,
            "state": self.state,
            "created_at": self.created_at,
            "closed_at": self.closed_at,
            "title": self.title,
        }

    @classmethod
    def from_json(cls, raw: dict) -> IssueRecord:
        closed = raw.get("closed_at")
        return cls(
            id=int(raw["id"]),
            number=int(raw["number"]),
            kind=raw["kind"],
            state=raw["state"],
            created_at=int(raw["created_at"]),
            closed_at=None if closed is None else int(closed),
            title=raw.get("title"),
        )


def token_from_env(environ: dict | None = None) -> str | None:
    environ = os.environ if environ is None else environ
    for name in TOKEN_ENV_VARS:
        value = environ.get(name)
        if value:
            return value
    return None


def parse_timestamp(text: str) -> int:
    """RFC 3339 timestamp to integer UTC epoch seconds."""
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    parsed = datetime.fromisoformat(text)
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return int(parsed.timestamp())


def normalize(raw: dict) -> IssueRecord | None:
    """Convert one host issue object; ``None`` means the record was dropped."""
    missing = [key for key in ("id", "number", "created_at") if raw.get(key) is None]
    if missing:
        raise MalformedRecord(f"issue object lacks {', '.join(missing)}: {str(raw)[:200]}")
    try:
        created = parse_timestamp(raw["created_at"])
        closed = parse_timestamp(raw["closed_at"]) if raw.get("closed_at") else None
    except (TypeError, ValueError) as exc:
        raise MalformedRecord(f"issue {raw.get('id')}: bad timestamp ({exc})") from exc

    state = raw.get("state")
    if state not in (OPEN, CLOSED) or (state == CLOSED) != (closed is not None):
        logger.warning("dropping issue #%s: state %r inconsistent with closed_at", raw["number"], state)
        return None
    if closed is not None and closed < created:
        logger.warning("dropping issue #%s: closed_at precedes created_at", raw["number"])
        return None
    return IssueRecord(
        id=int(raw["id"]),
        number=int(raw["number"]),
        kind=PULL_REQUEST if raw.get("pull_request") is not None else ISSUE,
        state=state,
        created_at=created,
        closed_at=closed,
        title=raw.get("title"),
    )


def normalize_pages(pages: Iterable[Sequence[dict]]) -> list[IssueRecord]:
    """Normalize every raw object, drop duplicates by id, order by id."""
    by_id: dict[int, IssueRecord] = {}
    for page in pages:
        for raw in page:
            record = normalize(raw)
            if record is None:
                continue
            if record.id in by_id:
                logger.warning("dropping duplicate issue id %s (#%s)", record.id, record.number)
                continue
            by_id[record.id] = record
    return [by_id[k] for k in sorted(by_id)]


class PageCache:
    """One JSON file per fetched URL."""

    def __init__(self, root: str | os.PathLike) -> None:
        self.root = Path(root)

    def _path(self, url: str) -> Path:
        return self.root / (hashlib.sha256(url.encode()).hexdigest() + ".json")

    def get(self, url: str) -> dict | None:
        path = self._path(url)
        if not path.is_file():
            return None
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            logger.warning("ignoring corrupt cache entry %s", path)
            return None
        return entry if entry.get("url") == url else None

    def put(self, url: str, body: list, has_next: bool) -> None:
        jsonio.write_json(self._path(url), {"url": url, "has_next": has_next, "body": body})


class IssueClient:
    """Paginated, cached, rate-limit aware reader of one repository's issues."""

    def __init__(
        self,
        token: str | None = None,
        cache_dir: str | os.PathLike | None = None,
        *,
        base_url: str = DEFAULT_API_URL,
        refresh: bool = False,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.time,
        max_retries: int = MAX_RETRIES,
        timeout: float = 30.0,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.cache = PageCache(cache_dir) if cache_dir is not None else None
        self.refresh = refresh
        self.sleep = sleep
        self.clock = clock
        self.max_retries = max_retries
        self.requests_made = 0
        headers = {"Accept": "application/vnd.github+json", "User-Agent": "repo-pulse"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._http = httpx.Client(headers=headers, transport=transport, timeout=timeout)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> IssueClient:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def page_url(self, owner: str, repo: str, page: int) -> str:
        return f"{self.base_url}/repos/{owner}/{repo}/issues?state=all&per_page={PER_PAGE}&page={page}"

    def fetch_issues(self, owner: str, repo: str) -> list[list[dict]]:
        pages = []
        page = 1
        while True:
            body, has_next = self._page(self.page_url(owner, repo, page))
            pages.append(body)
            if not has_next:
                return pages
            page += 1

    def _page(self, url: str) -> tuple[list, bool]:
        if self.cache is not None and not self.refresh:
            entry = self.cache.get(url)
            if entry is not None:
                return entry["body"], bool(entry["has_next"])
        body, has_next = self._request(url)
        if self.cache is not None:
            self.cache.put(url, body, has_next)
        return body, has_next

    def _request(self, url: str) -> tuple[list, bool]:
        for attempt in range(self.max_retries + 1):
            self.requests_made += 1
            try:
                resp = self._http.get(url)
            except httpx.TransportError as exc:
                raise NetworkError(f"GET {url}: {exc}") from exc
            wait = self._rate_limit_wait(resp)
            if wait is not None:
                if attempt == self.max_retries:
                    break
                logger.warning("rate limited on %s; sleeping %.0fs (retry %d)", url, wait, attempt + 1)
                self.sleep(wait)
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"GET {url}: HTTP {resp.status_code}")
            if resp.status_code == 404:
                raise NotFound(f"GET {url}: repository not found")
            if resp.status_code != 200:
                raise NetworkError(f"GET {url}: HTTP {resp.status_code}")
            try:
                body = resp.json()
            except ValueError as exc:
                raise NetworkError(f"GET {url}: invalid JSON body") from exc
            if not isinstance(body, list):
                raise NetworkError(f"GET {url}: expected a JSON array")
            link = resp.headers.get("link")
            has_next = 'rel="next"' in link if link is not None else len(body) >= PER_PAGE
            return body, has_next
        raise RateLimitExhausted(f"GET {url}: still rate limited after {self.max_retries} retries")

    def _rate_limit_wait(self, resp: httpx.Response) -> float | None:
        """Seconds to wait if ``resp`` is a rate-limit response, else ``None``."""
        headers = resp.headers
        if resp.status_code not in (403, 429):
            return None
        retry_after = headers.get("retry-after")
        exhausted = headers.get("x-ratelimit-remaining") == "0"
        if resp.status_code == 403 and retry_after is None and not exhausted:
            return None
        if retry_after is not None:
            try:
                return max(0.0, float(retry_after))
            except ValueError:
                pass
        reset = headers.get("x-ratelimit-reset")
        if reset is not None:
            try:
                return max(0.0, float(reset) - self.clock()) + 1.0
            except ValueError:
                pass
        return DEFAULT_RATE_LIMIT_WAIT


def fetch_issues(
    owner: str,
    repo: str,
    token: str | None,
    cache_dir: str | os.PathLike,
    **client_options,
) -> list[list[dict]]:
    """All raw issue pages for ``owner/repo`` (``state=all``)."""
    with IssueClient(token, cache_dir, **client_options) as client:
        return client.fetch_issues(owner, repo)


def split_owner_repo(owner_repo: str) -> tuple[str, str]:
    owner, sep, name = owner_repo.partition("/")
    if not sep or not owner or not name or "/" in name:
        raise ValueError(f"expected owner/name, got {owner_repo!r}")
    return owner, name


def issues_document(owner_repo: str, records: Sequence[IssueRecord]) -> dict:
    return {
        "schema": ISSUES_SCHEMA,
        "repo": owner_repo,
        "records": [r.to_json() for r in records],
    }


def write_issues(path, owner_repo: str, records: Sequence[IssueRecord]) -> Path:
    return jsonio.write_json(path, issues_document(owner_repo, records))


def read_issues(path) -> tuple[dict, list[IssueRecord]]:
    doc = jsonio.read_json(path, ISSUES_SCHEMA, producer="extract-issues")
    meta = {k: v for k, v in doc.items() if k != "records"}
    return meta, [IssueRecord.from_json(r) for r in doc.get("records", [])]
