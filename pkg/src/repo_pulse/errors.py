"""Exception hierarchy shared by all pipeline stages.

Every error carries the process exit code the CLI uses for it, so each
failure class is distinguishable by scripts driving the pipeline.
"""

from __future__ import annotations


class RepoPulseError(Exception):
    exit_code = 1


# vcs extraction
class NotARepository(RepoPulseError):
    exit_code = 10


class UnknownBranch(RepoPulseError):
    exit_code = 11


class EmptyRepository(RepoPulseError):
    exit_code = 12


class TreeReadError(RepoPulseError):
    exit_code = 13


# issue extraction
class AuthError(RepoPulseError):
    exit_code = 20


class NotFound(RepoPulseError):
    exit_code = 21


class RateLimitExhausted(RepoPulseError):
    exit_code = 22


class NetworkError(RepoPulseError):
    exit_code = 23


class MalformedRecord(RepoPulseError):
    exit_code = 24


# metrics
class EmptyInput(RepoPulseError):
    exit_code = 30


class InvalidCoverage(RepoPulseError, ValueError):
    exit_code = 31


class InvalidConfig(RepoPulseError, ValueError):
    exit_code = 32


# rendering
class EmptySeries(RepoPulseError):
    exit_code = 40


class StyleError(RepoPulseError, ValueError):
    exit_code = 41


# orchestration / file handoff
class MissingInput(RepoPulseError):
    exit_code = 50

    def __init__(self, path, producer: str) -> None:
        self.path = path
        self.producer = producer
        super().__init__(f"missing input {path}; produce it with `repo-pulse {producer}`")


class SchemaError(RepoPulseError):
    exit_code = 51
