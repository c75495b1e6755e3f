"""Cross-axis base deviation after perching, and gripper-vs-gripper comparison.

Axis convention (rail along world y): tilt turns the base about the rail, so
its intended motion is an arc in the x-z plane and ``x`` is the commanded
axis with ``y`` the headline cross axis. Pan swings the base along the rail,
so ``y`` is commanded and ``x`` is the headline cross axis. All three axes
are always reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .simrun import TrajectoryLog

AXES = ("x", "y", "z")
MANEUVER_AXES = {"tilt": ("x", "y"), "pan": ("y", "x")}  # (commanded, headline cross axis)
TIE_MM = 0.1
RELIABLE_MM = 0.1
CONTACT_FRACTION = 0.95
COMPLETION_FRACTION = 0.9


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class DeviationReport:
    """Base displacement relative to the perch-end position, in millimetres."""

    maneuver: str
    scenario: str
    model: str
    commanded_axis: str
    commanded_range: tuple  # signed (min, max) along the commanded axis
    axis_max: dict  # axis -> max |delta|
    axis_range: dict  # axis -> (min, max) delta
    perch_success: bool
    joint_peak_fraction: float = math.nan  # reached / commanded peak of the maneuver joint

    @property
    def cross_axes(self) -> tuple:
        return tuple(a for a in AXES if a != self.commanded_axis)

    @property
    def cross_axis_max(self) -> dict:
        return {a: self.axis_max[a] for a in self.cross_axes}

    @property
    def headline_axis(self) -> str:
        return MANEUVER_AXES[self.maneuver][1]

    def span(self, axis: str) -> float:
        lo, hi = self.axis_range[axis]
        return hi - lo

    @property
    def maneuver_completed(self) -> bool:
        return self.joint_peak_fraction >= COMPLETION_FRACTION

    def to_text(self) -> str:
        lines = [
            f"scenario {self.scenario}  model {self.model}  maneuver {self.maneuver}",
            f"perch success: {'yes' if self.perch_success else 'no'}",
            f"maneuver joint reached {self.joint_peak_fraction * 100:.1f}% of commanded peak",
            f"commanded axis {self.commanded_axis}: {self.commanded_range[0]:.3f} .. {self.commanded_range[1]:.3f} mm",
            f"{'axis':<5}{'role':<11}{'max_abs_mm':>12}{'min_mm':>11}{'max_mm':>11}{'span_mm':>11}",
        ]
        for a in AXES:
            role = "commanded" if a == self.commanded_axis else "cross"
            lo, hi = self.axis_range[a]
            lines.append(f"{a:<5}{role:<11}{self.axis_max[a]:>12.3f}{lo:>11.3f}{hi:>11.3f}{hi - lo:>11.3f}")
        return "\n".join(lines) + "\n"


def _model_label(ref: str) -> str:
    return ref.removeprefix("builtin:")


def cross_axis_deviation(log: TrajectoryLog, maneuver: str | None = None, perch_end: float | None = None) -> DeviationReport:
    """Deviation report for the rows from ``perch_end`` on.

    ``maneuver`` and ``perch_end`` default to the log's metadata.
    """
    maneuver = maneuver or log.header.get("maneuver", "")
    if maneuver not in MANEUVER_AXES:
        raise MetricError(f"unknown maneuver {maneuver!r} (expected tilt or pan)")
    if perch_end is None:
        raw = log.header.get("perch_end", "")
        if not raw:
            raise MetricError("perch-phase end time is not known")
        perch_end = float(raw)
    try:
        t = log.channel("t")
        P = np.stack([log.channel(c) for c in ("px", "py", "pz")], axis=1)
        fn = log.channel("fn_total")
    except KeyError as exc:
        raise MetricError(f"missing channel: {exc.args[0]}") from None
    if len(t) == 0:
        raise MetricError("log has no rows")
    dt = float(log.header.get("timestep", t[1] - t[0] if len(t) > 1 else 1.0))
    start = min(int(round(perch_end / dt)), len(t) - 1)
    d = (P[start:] - P[start]) * 1e3
    axis_max = {a: float(np.max(np.abs(d[:, k]))) for k, a in enumerate(AXES)}
    axis_range = {a: (float(d[:, k].min()), float(d[:, k].max())) for k, a in enumerate(AXES)}
    commanded = MANEUVER_AXES[maneuver][0]
    active = log.channel("n_contacts")[start:] > 0 if "n_contacts" in log.columns else fn[start:] > 0.0
    rows = active[1:] if len(active) > 1 else active
    perch_success = bool(np.mean(rows) >= CONTACT_FRACTION)
    frac = math.nan
    joint, peak = log.header.get("maneuver_joint", ""), log.header.get("maneuver_peak", "")
    col = f"q_joint_{joint}"
    if joint and peak and col in log.columns and float(peak) != 0.0:
        q = log.channel(col)[start:]
        frac = float(np.max(q / float(peak)))
    return DeviationReport(
        maneuver=maneuver,
        scenario=log.header.get("scenario", ""),
        model=_model_label(log.header.get("model", "")),
        commanded_axis=commanded,
        commanded_range=axis_range[commanded],
        axis_max=axis_max,
        axis_range=axis_range,
        perch_success=perch_success,
        joint_peak_fraction=frac,
    )


@dataclass(frozen=True)
class AxisComparison:
    axis: str
    commanded: bool
    a_max: float
    b_max: float
    a_span: float
    b_span: float
    ratio: float  # a_max / b_max
    reliable: bool  # False when the denominator is below 0.1 mm
    winner: str  # "a", "b" or "tie" (lower max wins)


@dataclass(frozen=True)
class ComparisonReport:
    maneuver: str
    a: DeviationReport
    b: DeviationReport
    rows: tuple

    def row(self, axis: str) -> AxisComparison:
        for r in self.rows:
            if r.axis == axis:
                return r
        raise KeyError(axis)

    @property
    def headline(self) -> AxisComparison:
        return self.row(MANEUVER_AXES[self.maneuver][1])

    def winner_label(self, axis: str) -> str:
        w = self.row(axis).winner
        return "tie" if w == "tie" else (self.a.model if w == "a" else self.b.model)

    def to_text(self) -> str:
        la, lb = self.a.model or "a", self.b.model or "b"
        lines = [
            f"compare {self.maneuver}: {la} (a) vs {lb} (b)",
            f"headline cross axis: {MANEUVER_AXES[self.maneuver][1]}",
            f"perch success: {la}={'yes' if self.a.perch_success else 'no'} {lb}={'yes' if self.b.perch_success else 'no'}",
            f"maneuver joint peak reached: {la}={self.a.joint_peak_fraction * 100:.1f}% {lb}={self.b.joint_peak_fraction * 100:.1f}%",
            f"{'axis':<5}{'role':<11}{'a_max_mm':>11}{'b_max_mm':>11}{'a_span_mm':>11}{'b_span_mm':>11}{'ratio_a/b':>11}  winner",
        ]
        for r in self.rows:
            ratio = f"{r.ratio:.3f}" + ("" if r.reliable else "*")
            lines.append(
                f"{r.axis:<5}{'commanded' if r.commanded else 'cross':<11}{r.a_max:>11.3f}{r.b_max:>11.3f}"
                f"{r.a_span:>11.3f}{r.b_span:>11.3f}{ratio:>11}  {self.winner_label(r.axis)}"
            )
        lines.append("* denominator below 0.1 mm: ratio unreliable")
        return "\n".join(lines) + "\n"


def _ratio(a: float, b: float) -> float:
    if b > 0.0:
        return a / b
    return 1.0 if a == 0.0 else math.inf


def compare(a: DeviationReport, b: DeviationReport) -> ComparisonReport:
    """Per-axis comparison of two reports for the same maneuver."""
    if a.maneuver != b.maneuver:
        raise MetricError(f"maneuver mismatch: {a.maneuver} vs {b.maneuver}")
    rows = []
    for ax in AXES:
        am, bm = a.axis_max[ax], b.axis_max[ax]
        if abs(am - bm) <= TIE_MM:
            winner = "tie"
        else:
            winner = "a" if am < bm else "b"
        rows.append(
            AxisComparison(ax, ax == a.commanded_axis, am, bm, a.span(ax), b.span(ax), _ratio(am, bm), bm >= RELIABLE_MM, winner)
        )
    return ComparisonReport(a.maneuver, a, b, tuple(rows))
