"""Coverage spectra and the Tarantula / SBI suspiciousness scores."""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import NoTests, TflmError


@dataclass(frozen=True)
class TestRecord:
    test_id: str
    outcome: str                 # "pass" | "fail"
    covered_lines: frozenset[int]

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.outcome not in ("pass", "fail"):
            raise TflmError(f"test {self.test_id!r}: outcome must be 'pass' or 'fail', got {self.outcome!r}")


@dataclass(frozen=True)
class CoverageMatrix:
    tests: tuple[TestRecord, ...]

    @property
    def total_passed(self) -> int:
        return sum(t.outcome == "pass" for t in self.tests)

    @property
    def total_failed(self) -> int:
        return sum(t.outcome == "fail" for t in self.tests)

    def counts(self, line: int) -> tuple[int, int]:
        """(Failed(s), Passed(s)) for one line."""
        failed = passed = 0
        for t in self.tests:
            if line in t.covered_lines:
                if t.outcome == "fail":
                    failed += 1
                else:
                    passed += 1
        return failed, passed

    def all_counts(self) -> dict[int, list[int]]:
        counts: dict[int, list[int]] = {}
        for t in self.tests:
            idx = 0 if t.outcome == "fail" else 1
            for line in t.covered_lines:
                counts.setdefault(line, [0, 0])[idx] += 1
        return counts

    def check_lines(self, executable_lines) -> None:
        allowed = set(executable_lines)
        for t in self.tests:
            extra = t.covered_lines - allowed
            if extra:
                raise TflmError(f"test {t.test_id!r} covers non-executable lines {sorted(extra)}")

    @classmethod
    def from_dict(cls, data: dict) -> "CoverageMatrix":
        tests = []
        for entry in data["tests"]:
            tests.append(TestRecord(str(entry["id"]), entry["outcome"],
                                    frozenset(int(x) for x in entry["lines"])))
        return cls(tuple(tests))

    @classmethod
    def load(cls, path) -> "CoverageMatrix":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {"tests": [{"id": t.test_id, "outcome": t.outcome, "lines": sorted(t.covered_lines)}
                          for t in self.tests]}


def tarantula(failed: int, passed: int, total_failed: int, total_passed: int) -> float:
    """Tarantula ratio for one statement, with the degenerate cases pinned.

    No failing tests at all gives 0 everywhere; no passing tests gives 1 for
    any line touched by a failure. Unexecuted lines score 0.
    """
    if total_failed == 0 or failed == 0:
        return 0.0
    if total_passed == 0:
        return 1.0
    fail_ratio = failed / total_failed
    return fail_ratio / (passed / total_passed + fail_ratio)


def sbi(failed: int, passed: int) -> float:
    if failed + passed == 0:
        return 0.0
    return failed / (failed + passed)


def _check(matrix: CoverageMatrix, executable_lines):
    if not matrix.tests:
        raise NoTests("coverage matrix has no tests")
    if not executable_lines:
        raise TflmError("no executable lines to score")


def tarantula_scores(matrix: CoverageMatrix, executable_lines) -> dict[int, float]:
    _check(matrix, executable_lines)
    tf, tp = matrix.total_failed, matrix.total_passed
    counts = matrix.all_counts()
    return {s: tarantula(*counts.get(s, (0, 0)), tf, tp) for s in sorted(executable_lines)}


def sbi_scores(matrix: CoverageMatrix, executable_lines) -> dict[int, float]:
    _check(matrix, executable_lines)
    counts = matrix.all_counts()
    return {s: sbi(*counts.get(s, (0, 0))) for s in sorted(executable_lines)}


def node_suspiciousness(scores: dict[int, float], program) -> dict[int, float]:
    """Max line score over each node's span; 0 when the span holds no scored line."""
    ordered = sorted(scores)
    out = {}
    for node in program.nodes:
        a, b = node.span
        lo = bisect.bisect_left(ordered, a)
        hi = bisect.bisect_right(ordered, b)
        out[node.node_id] = max((scores[s] for s in ordered[lo:hi]), default=0.0)
    return out
