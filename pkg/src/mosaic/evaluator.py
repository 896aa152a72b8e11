"""Scoring and reporting: the all-subproblems-pass rule, error-class
histograms with the semantic/execution two-way split, decade-binned output
deviation histograms, and deterministic report emission."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import IncompleteResults, NegativeDeviation
from .grounding import ErrorClass, stat_category

KNOWN_DOMAIN_ORDER = ("physics", "chemistry", "biology", "materials", "mathematics")

NUM_BINS = 13
# Decade edges 1e-10 .. 1e1; boundaries belong to the upper bin.
BIN_EDGES = tuple(float(f"1e{e}") for e in range(-10, 2))
BIN_LABELS = (
    "<1e-10",
    *(f"[1e{e},1e{e + 1})" for e in range(-10, 1)),
    ">=1e1",
)


@dataclass(frozen=True)
class SubResult:
    problem_id: str
    subproblem_id: str
    domain: str
    passed: bool
    error_class: ErrorClass
    deviations: tuple[float, ...] = ()
    rounds_used: int = 0

    def __post_init__(self):
        if self.passed != (self.error_class is ErrorClass.NONE):
            raise ValueError("passed must hold exactly when error_class is none")


@dataclass(frozen=True)
class Tally:
    main_solved: int = 0
    main_total: int = 0
    sub_solved: int = 0
    sub_total: int = 0

    def __add__(self, other: "Tally") -> "Tally":
        return Tally(
            self.main_solved + other.main_solved,
            self.main_total + other.main_total,
            self.sub_solved + other.sub_solved,
            self.sub_total + other.sub_total,
        )

    def as_row(self) -> tuple[str, str]:
        return (f"{self.main_solved}/{self.main_total}",
                f"{self.sub_solved}/{self.sub_total}")


@dataclass(frozen=True)
class ScoreBoard:
    total: Tally
    per_domain: Mapping[str, Tally]


def domain_order(domains: Iterable[str]) -> list[str]:
    """Paper-table order for the five known domains, extensions sorted after."""
    domains = set(domains)
    ordered = [d for d in KNOWN_DOMAIN_ORDER if d in domains]
    ordered.extend(sorted(domains - set(KNOWN_DOMAIN_ORDER)))
    return ordered


def score(
    results: Sequence[SubResult],
    expected: Mapping[str, Sequence[str]] | None = None,
) -> ScoreBoard:
    """A main problem counts as solved iff every one of its subproblem
    results passes. `expected` (problem id -> subproblem ids) enables the
    completeness check; duplicates are always rejected."""
    by_problem: dict[str, list[SubResult]] = {}
    for result in results:
        by_problem.setdefault(result.problem_id, []).append(result)

    for pid, subs in by_problem.items():
        seen: set[str] = set()
        for sub in subs:
            if sub.subproblem_id in seen:
                raise IncompleteResults(
                    f"problem {pid} has duplicate result for {sub.subproblem_id}"
                )
            seen.add(sub.subproblem_id)
        domains = {s.domain for s in subs}
        if len(domains) > 1:
            raise IncompleteResults(
                f"problem {pid} results span domains {sorted(domains)}"
            )
    if expected is not None:
        for pid, sub_ids in expected.items():
            have = {s.subproblem_id for s in by_problem.get(pid, [])}
            missing = [sid for sid in sub_ids if sid not in have]
            if missing:
                raise IncompleteResults(
                    f"problem {pid} missing result for {missing[0]}"
                )

    per_domain: dict[str, Tally] = {}
    for pid in sorted(by_problem):
        subs = by_problem[pid]
        domain = subs[0].domain
        solved = all(s.passed for s in subs)
        tally = per_domain.get(domain, Tally())
        per_domain[domain] = tally + Tally(
            main_solved=1 if solved else 0,
            main_total=1,
            sub_solved=sum(1 for s in subs if s.passed),
            sub_total=len(subs),
        )
    total = Tally()
    for tally in per_domain.values():
        total = total + tally
    return ScoreBoard(total=total, per_domain=per_domain)


# --------------------------------------------------------------------------
# Error histogram
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorHistogram:
    fine: Mapping[tuple[str, ErrorClass], int]
    split: Mapping[str, int]  # semantic | execution_failure

    @property
    def failures(self) -> int:
        return sum(self.fine.values())


def error_histogram(results: Sequence[SubResult]) -> ErrorHistogram:
    """Counts over failing results only; the two-way split sums to the
    total failure count."""
    fine: dict[tuple[str, ErrorClass], int] = {}
    split = {"semantic": 0, "execution_failure": 0}
    for result in results:
        if result.passed:
            continue
        key = (result.domain, result.error_class)
        fine[key] = fine.get(key, 0) + 1
        split[stat_category(result.error_class)] += 1
    return ErrorHistogram(fine=fine, split=split)


# --------------------------------------------------------------------------
# Precision histogram
# --------------------------------------------------------------------------

def deviation_bin(d: float) -> int:
    """13 bins: underflow [0,1e-10), decade bins [1e-10,1e1) with boundaries
    owned by the upper bin, overflow [1e1, inf]."""
    if math.isnan(d) or d < 0:
        raise NegativeDeviation(f"deviation {d!r} outside [0, inf]")
    if d < BIN_EDGES[0]:
        return 0
    if d >= BIN_EDGES[-1]:
        return NUM_BINS - 1
    for i in range(len(BIN_EDGES) - 1):
        if BIN_EDGES[i] <= d < BIN_EDGES[i + 1]:
            return i + 1
    raise AssertionError(f"no bin accepted {d!r}")  # unreachable: edges partition


@dataclass
class PrecisionHistogram:
    bins: list[int] = field(default_factory=lambda: [0] * NUM_BINS)

    def add(self, d: float) -> None:
        self.bins[deviation_bin(d)] += 1

    @property
    def count(self) -> int:
        return sum(self.bins)


@dataclass
class PrecisionReport:
    total: PrecisionHistogram
    per_domain: dict[str, PrecisionHistogram]


def precision_histogram(results: Sequence[SubResult]) -> PrecisionReport:
    """Bins every recorded deviation of every result, passing and failing."""
    report = PrecisionReport(total=PrecisionHistogram(), per_domain={})
    for result in results:
        domain_hist = report.per_domain.setdefault(result.domain, PrecisionHistogram())
        for d in result.deviations:
            report.total.add(d)
            domain_hist.add(d)
    return report


# --------------------------------------------------------------------------
# Report emission
# --------------------------------------------------------------------------

@dataclass
class Histograms:
    errors: ErrorHistogram
    precision: PrecisionReport


def scoreboard_row(scoreboard: ScoreBoard) -> str:
    """Single-row rendering: total main | total sub | per-domain pairs."""
    cells = list(scoreboard.total.as_row())
    for domain in domain_order(scoreboard.per_domain):
        cells.extend(scoreboard.per_domain[domain].as_row())
    return " | ".join(cells)


def _scoreboard_json(scoreboard: ScoreBoard) -> dict:
    def tally(t: Tally) -> dict:
        return {
            "main_solved": t.main_solved,
            "main_total": t.main_total,
            "sub_solved": t.sub_solved,
            "sub_total": t.sub_total,
        }

    return {
        "total": tally(scoreboard.total),
        "per_domain": {d: tally(t) for d, t in sorted(scoreboard.per_domain.items())},
    }


def _histograms_json(histograms: Histograms) -> dict:
    fine: dict[str, dict[str, int]] = {}
    for (domain, error_class), count in histograms.errors.fine.items():
        fine.setdefault(domain, {})[error_class.value] = count
    return {
        "errors": {
            "fine": {d: dict(sorted(v.items())) for d, v in sorted(fine.items())},
            "split": dict(histograms.errors.split),
        },
        "precision": {
            "labels": list(BIN_LABELS),
            "total": list(histograms.precision.total.bins),
            "per_domain": {
                d: list(h.bins)
                for d, h in sorted(histograms.precision.per_domain.items())
            },
        },
    }


def _report_markdown(scoreboard: ScoreBoard, histograms: Histograms,
                     manifest: Mapping) -> str:
    domains = domain_order(scoreboard.per_domain)
    lines = ["# Run Report", ""]
    for key in ("strategy", "corpus_digest"):
        if key in manifest:
            lines.append(f"- {key}: {manifest[key]}")
    lines.append("")

    lines.append("## Scoreboard (solved/total)")
    lines.append("")
    header = ["Main", "Sub"]
    for domain in domains:
        header.extend([f"{domain} Main", f"{domain} Sub"])
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    lines.append("| " + scoreboard_row(scoreboard) + " |")
    lines.append("")

    lines.append("## Errors (failing subproblems)")
    lines.append("")
    lines.append(f"- semantic: {histograms.errors.split['semantic']}")
    lines.append(f"- execution_failure: {histograms.errors.split['execution_failure']}")
    lines.append("")
    lines.append("| domain | class | count |")
    lines.append("|---|---|---|")
    for (domain, error_class), count in sorted(
        histograms.errors.fine.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
    ):
        lines.append(f"| {domain} | {error_class.value} | {count} |")
    lines.append("")

    lines.append("## Output deviation bins")
    lines.append("")
    precision_domains = domain_order(histograms.precision.per_domain)
    lines.append("| bin | total | " + " | ".join(precision_domains) + " |")
    lines.append("|---|---|" + "---|" * len(precision_domains))
    for i, label in enumerate(BIN_LABELS):
        row = [label, str(histograms.precision.total.bins[i])]
        row.extend(str(histograms.precision.per_domain[d].bins[i])
                   for d in precision_domains)
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    return "\n".join(lines)


def write_report(
    scoreboard: ScoreBoard,
    histograms: Histograms,
    manifest: Mapping,
    outdir: str | Path,
) -> tuple[Path, Path]:
    """Emit report.json (full structures) and report.md (tables). Identical
    inputs produce byte-identical files."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    payload = {
        "v": 1,
        "scoreboard": _scoreboard_json(scoreboard),
        "histograms": _histograms_json(histograms),
        "manifest": dict(manifest),
    }
    json_path = outdir / "report.json"
    json_path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    md_path = outdir / "report.md"
    md_path.write_text(_report_markdown(scoreboard, histograms, manifest),
                       encoding="utf-8")
    return json_path, md_path
