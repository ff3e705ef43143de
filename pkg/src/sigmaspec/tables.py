"""Reference eigenvalues and the regression check against them.

Each cell is identified as ``profile/method/mode``, e.g.
``groundstate/shooting/gauge`` or ``excited/evolution/second-stable``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .exceptions import ValidationError

__all__ = ["Cell", "CELLS", "cell", "CellResult", "evaluate_cells", "format_report"]

MODE_ORDER = {
    0: ("gauge", "first-stable", "second-stable", "third-stable"),
    1: ("unstable", "gauge", "first-stable", "second-stable"),
}
PROFILE_NAMES = {0: "groundstate", 1: "excited"}


@dataclass(frozen=True)
class Cell:
    profile_n: int
    method: str
    mode: str
    reference: float
    tolerance: float

    @property
    def key(self):
        return f"{PROFILE_NAMES[self.profile_n]}/{self.method}/{self.mode}"

    @property
    def level(self):
        return MODE_ORDER[self.profile_n].index(self.mode)


CELLS = (
    Cell(0, "evolution", "gauge", 1.0, 0.01),
    Cell(0, "evolution", "first-stable", -0.5424, 0.005),
    Cell(0, "evolution", "second-stable", -2.00, 0.05),
    Cell(0, "evolution", "third-stable", -3.3, 0.2),
    Cell(0, "shooting", "gauge", 1.0, 1e-6),
    Cell(0, "shooting", "first-stable", -0.54246, 5e-5),
    Cell(1, "evolution", "unstable", 6.3336, 0.007),
    Cell(1, "evolution", "gauge", 1.0, 0.01),
    Cell(1, "evolution", "first-stable", -0.518, 0.01),
    Cell(1, "evolution", "second-stable", -1.7, 0.1),
    Cell(1, "shooting", "unstable", 6.333625, 1e-4),
    Cell(1, "shooting", "gauge", 1.0, 1e-6),
    Cell(1, "shooting", "first-stable", -0.5186, 1e-4),
)

# shooting scan ranges that contain exactly the tabulated modes
SHOOTING_RANGES = {0: (-1.0, 2.0), 1: (-1.0, 7.5)}


def cell(key):
    for c in CELLS:
        if c.key == key:
            return c
    known = ", ".join(c.key for c in CELLS)
    raise ValidationError(f"unknown cell {key!r}; known cells: {known}")


@dataclass(frozen=True)
class CellResult:
    cell: Cell
    value: float | None
    uncertainty: float | None

    @property
    def error(self):
        return None if self.value is None else abs(self.value - self.cell.reference)

    @property
    def passed(self):
        return self.value is not None and self.error <= self.cell.tolerance

    def to_dict(self):
        return {"cell": self.cell.key, "reference": self.cell.reference,
                "tolerance": self.cell.tolerance, "value": self.value,
                "uncertainty": self.uncertainty, "error": self.error, "pass": self.passed}


def evaluate_cells(cells, estimates):
    """Match ``estimates[(profile_n, method)]`` (lists ordered by level) to ``cells``."""
    out = []
    for c in cells:
        found = estimates.get((c.profile_n, c.method), [])
        if c.level < len(found):
            e = found[c.level]
            out.append(CellResult(c, float(e.value), float(e.uncertainty)))
        else:
            out.append(CellResult(c, None, None))
    return out


def format_report(results):
    lines = [f"{'cell':38s} {'reference':>10s} {'value':>14s} {'error':>10s} {'tol':>8s}  status"]
    for r in results:
        val = "missing" if r.value is None else f"{r.value:.8f}"
        err = "-" if r.error is None else f"{r.error:.2e}"
        lines.append(f"{r.cell.key:38s} {r.cell.reference:>10g} {val:>14s} {err:>10s} "
                     f"{r.cell.tolerance:>8.0e}  {'PASS' if r.passed else 'FAIL'}")
    npass = sum(r.passed for r in results)
    lines.append(f"{npass}/{len(results)} cells pass")
    return "\n".join(lines)
