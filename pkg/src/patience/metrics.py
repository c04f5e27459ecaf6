"""Benchmark report tables: per-iteration entropy curves and confidence
evolution, emitted as diff-stable CSVs plus a plain-text summary.

Plotting is out of scope; the CSVs are written for external tools.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ReportError
from .sim import BenchmarkRun, CaseOutcome


@dataclass(frozen=True)
class EntropyCurve:
    """Mean entropy per iteration for one policy."""

    policy: str
    values: tuple[float, ...]  # H_0 .. H_T means over completed cases
    cases: int
    carried_cases: int  # cases that ended early and repeat their final value

    @property
    def carried(self) -> bool:
        return self.carried_cases > 0


@dataclass(frozen=True)
class ConfidencePoint:
    iteration: int
    top1: float
    top2: float

    @property
    def gap(self) -> float:
        return self.top1 - self.top2


@dataclass(frozen=True)
class ConfidenceEvolution:
    """Leading-candidate probabilities across one case's consultation."""

    case_id: str
    points: tuple[ConfidencePoint, ...]


def _carried_value(trace: tuple[float, ...], t: int) -> float:
    # cases that stopped early repeat their final value for later iterations
    return trace[t] if t < len(trace) else trace[-1]


def entropy_curves(run: BenchmarkRun) -> list[EntropyCurve]:
    """Mean entropy at each iteration 0..horizon, one curve per policy.

    Failed cases carry no trace and are excluded; early-stopping cases are
    carried forward and counted in ``carried_cases``.
    """
    curves = []
    for policy in run.policies:
        completed = [o for o in run.outcomes_for(policy) if not o.failed]
        if not completed:
            curves.append(
                EntropyCurve(policy=policy, values=(), cases=0, carried_cases=0)
            )
            continue
        values = tuple(
            sum(_carried_value(o.entropy_trace, t) for o in completed) / len(completed)
            for t in range(run.horizon + 1)
        )
        carried = sum(
            1 for o in completed if len(o.entropy_trace) < run.horizon + 1
        )
        curves.append(
            EntropyCurve(
                policy=policy,
                values=values,
                cases=len(completed),
                carried_cases=carried,
            )
        )
    return curves


def _evolution(outcome: CaseOutcome) -> ConfidenceEvolution:
    points = tuple(
        ConfidencePoint(iteration=t, top1=one, top2=two)
        for t, (one, two) in enumerate(zip(outcome.top1_trace, outcome.top2_trace))
    )
    return ConfidenceEvolution(case_id=outcome.case_id, points=points)


def confidence_evolution(run: BenchmarkRun, policy: str = "app") -> list[ConfidenceEvolution]:
    """Per-case top-1/top-2 trajectories for one policy.

    Defaults to the lookahead policy; falls back to the run's first policy
    when that one was not benchmarked.  Failed cases are skipped.
    """
    if policy not in run.policies:
        policy = run.policies[0]
    return [
        _evolution(o) for o in run.outcomes_for(policy) if not o.failed
    ]


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write report file {path}: {exc}")


def emit_report(
    run: BenchmarkRun,
    curves: list[EntropyCurve],
    evolutions: list[ConfidenceEvolution],
    path: str | Path,
) -> list[Path]:
    """Write ``entropy_curves.csv``, ``confidence.csv`` and ``summary.txt``
    under ``path``; returns the written files.  Output is byte-stable for
    fixed inputs."""
    root = Path(path)
    curve_lines = ["policy,iteration,mean_entropy,n"]
    for curve in curves:
        for t, value in enumerate(curve.values):
            curve_lines.append(f"{curve.policy},{t},{value:.6f},{curve.cases}")
    confidence_lines = ["case,iteration,top1,top2,gap"]
    for evo in evolutions:
        for p in evo.points:
            confidence_lines.append(
                f"{evo.case_id},{p.iteration},{p.top1:.6f},{p.top2:.6f},{p.gap:.6f}"
            )
    summary_lines = [
        f"benchmark seed {run.seed}, horizon {run.horizon}, "
        f"{len(run.case_ids)} cases",
        "",
    ]
    if not curves:
        summary_lines.append("no data")
    else:
        by_policy = {a.policy: a for a in run.aggregates}
        for curve in curves:
            agg = by_policy.get(curve.policy)
            if curve.cases == 0 or agg is None:
                summary_lines.append(f"{curve.policy}: no data")
                continue
            line = (
                f"{curve.policy}: hit_rate {agg.hit_rate:.6f}, "
                f"mean_turns {agg.mean_turns:.6f}, "
                f"final_entropy {curve.values[-1]:.6f}, "
                f"cases {curve.cases}, errors {agg.errors}"
            )
            if curve.carried:
                line += f" (carry-forward applied to {curve.carried_cases} cases)"
            summary_lines.append(line)
    written = []
    for name, lines in (
        ("entropy_curves.csv", curve_lines),
        ("confidence.csv", confidence_lines),
        ("summary.txt", summary_lines),
    ):
        target = root / name
        _write(target, "\n".join(lines) + "\n")
        written.append(target)
    return written
