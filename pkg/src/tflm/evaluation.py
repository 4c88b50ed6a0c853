"""Line rankings, the FS (fraction skipped) metric and leave-one-out evaluation."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import InsufficientVersions, MissingPosterior, NoBuggyLine
from .learning import TrainingConfig, batch_buggy_posteriors, train
from .minic import ParsedProgram, finest_enclosing_nodes
from .model import BUGGY, TflmSpec
from .spectra import sbi_scores, tarantula_scores

log = logging.getLogger(__name__)

CDF_STEPS = 100
_EPS = 1e-12


@dataclass(frozen=True)
class Ranking:
    entries: tuple[tuple[int, float], ...]   # (line, score), most suspicious first

    @property
    def lines(self) -> list[int]:
        return [ln for ln, _ in self.entries]

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class FsReport:
    fs: float
    top_buggy_rank: int        # 1-based
    executable_count: int


def rank_line_scores(line_scores: dict[int, float]) -> Ranking:
    """Descending score, ties broken by ascending line number."""
    return Ranking(tuple(sorted(((int(ln), float(s)) for ln, s in line_scores.items()),
                                key=lambda e: (-e[1], e[0]))))


def line_scores_from_nodes(posteriors: dict[int, float], program: ParsedProgram) -> dict[int, float]:
    finest = finest_enclosing_nodes(program)
    missing = sorted({nid for nid in finest.values() if nid not in posteriors})
    if missing:
        raise MissingPosterior(f"no posterior for node(s) {missing}")
    return {ln: posteriors[nid] for ln, nid in finest.items()}


def rank_lines(posteriors: dict[int, float], program: ParsedProgram) -> Ranking:
    """Each executable line takes the posterior of its finest enclosing node."""
    return rank_line_scores(line_scores_from_nodes(posteriors, program))


def fs_score(ranking: Ranking, buggy_lines) -> FsReport:
    buggy = set(buggy_lines)
    lines = ranking.lines
    if not buggy or not buggy <= set(lines):
        raise NoBuggyLine(f"buggy lines {sorted(buggy)} are empty or not all ranked")
    n = len(lines)
    top = next(i for i, ln in enumerate(lines) if ln in buggy)
    return FsReport((n - top - 1) / n, top + 1, n)


def localize(spec: TflmSpec, program: ParsedProgram, attributes: dict) -> Ranking:
    """Rank a program's lines by the model's buggy posterior."""
    observed = {k: v for k, v in attributes.items() if k[1] != BUGGY}
    (posteriors,) = batch_buggy_posteriors(spec, [(program, observed)])
    return rank_lines(posteriors, program)


def tarantula_ranking(entry) -> Ranking:
    return rank_line_scores(tarantula_scores(entry.coverage, entry.program.executable_lines))


def sbi_ranking(entry) -> Ranking:
    return rank_line_scores(sbi_scores(entry.coverage, entry.program.executable_lines))


# -- cross-validation ------------------------------------------------------------

@dataclass
class FoldResult:
    version_id: str
    k: int
    tflm: FsReport
    tarantula: FsReport
    sbi: FsReport
    inner_scores: dict[int, float] = field(default_factory=dict)
    training_fingerprint: str = ""


@dataclass
class CvReport:
    folds: list[FoldResult]

    def mean(self, method: str) -> float:
        return sum(getattr(f, method).fs for f in self.folds) / len(self.folds)

    def wins(self) -> int:
        return sum(f.tflm.fs > f.tarantula.fs for f in self.folds)

    def to_dict(self) -> dict:
        return {
            "folds": [{"version_id": f.version_id, "k": f.k, "fs_tflm": f.tflm.fs,
                       "fs_tarantula": f.tarantula.fs, "fs_sbi": f.sbi.fs,
                       "inner_fs": {str(k): v for k, v in sorted(f.inner_scores.items())}}
                      for f in self.folds],
            "mean_fs": {m: self.mean(m) for m in ("tflm", "tarantula", "sbi")},
            "tflm_wins_over_tarantula": self.wins(),
        }


def entry_fingerprint(entry) -> str:
    h = hashlib.sha256()
    h.update(entry.program.source.encode())
    h.update(json.dumps(sorted((k[0], k[1], v) for k, v in entry.attributes.items())).encode())
    return h.hexdigest()


def corpus_fingerprint(entries) -> str:
    return hashlib.sha256("".join(sorted(entry_fingerprint(e) for e in entries)).encode()).hexdigest()


class _ModelCache:
    """Trained models keyed by (k, excluded versions).

    The inner fold that holds out j inside the outer fold holding out i
    trains on the same versions as the one holding out i inside j's outer
    fold, so each such model is trained once.
    """

    def __init__(self, corpus, config: TrainingConfig):
        self.corpus = corpus
        self.config = config
        self.models: dict = {}

    def get(self, k: int, excluded: frozenset) -> TflmSpec:
        key = (k, excluded)
        if key not in self.models:
            training = [e for i, e in enumerate(self.corpus) if i not in excluded]
            self.models[key] = train(training, replace(self.config, k=k)).spec
        return self.models[key]

    def fs(self, k: int, excluded: frozenset, held_out: int) -> FsReport:
        entry = self.corpus[held_out]
        return fs_score(localize(self.get(k, excluded), entry.program, entry.attributes), entry.buggy_lines)


def select_k(cache: _ModelCache, training: list[int], k_range, outer: frozenset = frozenset()) -> tuple[int, dict]:
    """Mean inner leave-one-out FS per k; best k, ties to the smaller.

    With a single training version there is nothing to hold out and the
    smallest k is chosen.
    """
    ks = sorted(k_range)
    if len(training) < 2:
        return ks[0], {}
    scores = {}
    for k in ks:
        vals = [cache.fs(k, outer | {j}, j).fs for j in training]
        scores[k] = sum(vals) / len(vals)
    best = max(ks, key=lambda k: (scores[k], -k))
    return best, scores


def cross_validate(corpus, k_range=range(1, 5), config: TrainingConfig | None = None) -> CvReport:
    """Leave-one-version-out evaluation of the model against Tarantula and SBI."""
    corpus = list(corpus)
    if len(corpus) < 2:
        raise InsufficientVersions(f"need at least 2 versions, got {len(corpus)}")
    config = config or TrainingConfig()
    cache = _ModelCache(corpus, config)
    folds = []
    for i, entry in enumerate(corpus):
        outer = frozenset({i})
        training = [j for j in range(len(corpus)) if j != i]
        k, inner = select_k(cache, training, k_range, outer)
        result = FoldResult(
            version_id=entry.version_id or str(i),
            k=k,
            tflm=cache.fs(k, outer, i),
            tarantula=fs_score(tarantula_ranking(entry), entry.buggy_lines),
            sbi=fs_score(sbi_ranking(entry), entry.buggy_lines),
            inner_scores=inner,
            training_fingerprint=corpus_fingerprint([corpus[j] for j in training]),
        )
        log.info("fold %s  k=%d  fs tflm %.3f  tarantula %.3f  sbi %.3f", result.version_id, k,
                 result.tflm.fs, result.tarantula.fs, result.sbi.fs)
        folds.append(result)
    return CvReport(folds)


# -- output ----------------------------------------------------------------------

def export_cdf(reports) -> list[tuple[float, float]]:
    """(threshold, fraction of runs with FS >= threshold) for thresholds 0.00 .. 1.00."""
    values = [r.fs if isinstance(r, FsReport) else float(r) for r in reports]
    if not values:
        raise ValueError("no FS values to summarize")
    rows = []
    for step in range(CDF_STEPS + 1):
        t = step / CDF_STEPS
        rows.append((t, sum(v >= t - _EPS for v in values) / len(values)))
    return rows


def write_cdf_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "fraction"])
        for t, frac in rows:
            w.writerow([f"{t:.2f}", repr(frac)])


def write_report(report: CvReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=1) + "\n", encoding="utf-8")


__all__ = [
    "CvReport",
    "FoldResult",
    "FsReport",
    "Ranking",
    "corpus_fingerprint",
    "cross_validate",
    "export_cdf",
    "fs_score",
    "localize",
    "rank_line_scores",
    "rank_lines",
    "sbi_ranking",
    "select_k",
    "tarantula_ranking",
    "write_cdf_csv",
    "write_report",
]
