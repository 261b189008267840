"""Outer (cutting-plane) and inner (Lipschitz envelope) approximations of a cost-to-go."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CutRejected, NumericalFailure
from .lp import BasisCache, LinearProgram

CUT_TOL = 1e-7


@dataclass(frozen=True)
class Cut:
    """Affine minorant ``value + gradient'(x - anchor)``."""

    value: float
    gradient: np.ndarray
    anchor: np.ndarray
    stage: int = 0

    def __call__(self, x):
        return float(self.value + self.gradient @ (np.asarray(x, dtype=float) - self.anchor))

    def to_dict(self):
        return {
            "value": float(self.value),
            "gradient": np.asarray(self.gradient).tolist(),
            "anchor": np.asarray(self.anchor).tolist(),
            "stage": self.stage,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["value"]), np.asarray(d["gradient"], dtype=float), np.asarray(d["anchor"], dtype=float), int(d.get("stage", 0)))


class LowerApprox:
    """Maximum of a floor value (0 at initialization) and the collected cuts.

    A terminal approximation is identically zero and accepts no cuts.
    """

    def __init__(self, dim, stage=0, lipschitz=np.inf, terminal=False, floor=0.0):
        self.dim = dim
        self.stage = stage
        self.lipschitz = lipschitz
        self.terminal = terminal
        self.floor = floor
        self.cuts = []
        self.version = 0

    def evaluate(self, x):
        if self.terminal or not self.cuts:
            return 0.0 if self.terminal else self.floor
        x = np.asarray(x, dtype=float)
        G, r = self.epigraph_rows()
        return float(max(self.floor, np.max(G @ x - r)))

    __call__ = evaluate

    def add_cut(self, cut: Cut):
        if self.terminal:
            raise CutRejected("terminal cost-to-go is fixed at zero")
        if np.max(np.abs(cut.gradient), initial=0.0) > self.lipschitz + CUT_TOL * max(1.0, self.lipschitz):
            raise CutRejected(f"cut gradient {np.max(np.abs(cut.gradient))} exceeds bound {self.lipschitz}")
        self.cuts.append(cut)
        self._rows = None
        self.version += 1

    def epigraph_rows(self):
        """``(U, r)`` such that each cut reads ``U_c x - r_c``."""
        if getattr(self, "_rows", None) is None:
            if self.cuts:
                U = np.array([c.gradient for c in self.cuts], dtype=float).reshape(len(self.cuts), self.dim)
                r = np.array([c.gradient @ c.anchor - c.value for c in self.cuts], dtype=float)
            else:
                U, r = np.zeros((0, self.dim)), np.zeros(0)
            self._rows = (U, r)
        return self._rows

    def to_dict(self):
        return {
            "stage": self.stage,
            "dim": self.dim,
            "lipschitz": None if not np.isfinite(self.lipschitz) else self.lipschitz,
            "terminal": self.terminal,
            "floor": self.floor,
            "cuts": [c.to_dict() for c in self.cuts],
        }

    @classmethod
    def from_dict(cls, d):
        lip = d.get("lipschitz")
        obj = cls(int(d["dim"]), int(d.get("stage", 0)), np.inf if lip is None else float(lip), bool(d.get("terminal", False)), float(d.get("floor", 0.0)))
        obj.cuts = [Cut.from_dict(c) for c in d.get("cuts", [])]
        obj.version = len(obj.cuts)
        return obj


class UpperApprox:
    """Convex hull of the cones ``v_j + M ||x - x_j||_1`` over the visited points."""

    def __init__(self, dim, lipschitz, stage=0, terminal=False):
        self.dim = dim
        self.lipschitz = float(lipschitz)
        self.stage = stage
        self.terminal = terminal
        self.points = []
        self.values = []
        self.version = 0
        self._cache = None

    def add_point(self, x, v):
        if self.terminal or not np.isfinite(v):
            return
        self.points.append(np.asarray(x, dtype=float).copy())
        self.values.append(float(v))
        self.version += 1
        self._cache = None

    def evaluate(self, x):
        if self.terminal:
            return 0.0
        if not self.points:
            return np.inf
        x = np.asarray(x, dtype=float)
        if len(self.points) == 1:
            return self.values[0] + self.lipschitz * float(np.abs(x - self.points[0]).sum())
        if self._cache is None:
            self._cache = (self._template(), BasisCache())
        lp, cache = self._cache
        lp.e[: self.dim] = x
        sol = cache.solve(lp)
        if not sol.optimal:
            raise NumericalFailure(f"envelope LP ended with status {sol.status.value}")
        return float(sol.objective)

    __call__ = evaluate

    def _template(self):
        N, d, M = len(self.points), self.dim, self.lipschitz
        P = np.array(self.points).T  # d x N
        c = np.concatenate([self.values, np.full(2 * d, M)])
        E = np.zeros((d + 1, N + 2 * d))
        E[:d, :N] = P
        E[:d, N : N + d] = np.eye(d)
        E[:d, N + d :] = -np.eye(d)
        E[d, :N] = 1.0
        e = np.zeros(d + 1)
        e[d] = 1.0
        return LinearProgram(c, E=E, e=e)

    def to_dict(self):
        return {
            "stage": self.stage,
            "dim": self.dim,
            "lipschitz": self.lipschitz,
            "terminal": self.terminal,
            "points": [p.tolist() for p in self.points],
            "values": list(self.values),
        }

    @classmethod
    def from_dict(cls, d):
        obj = cls(int(d["dim"]), float(d["lipschitz"]), int(d.get("stage", 0)), bool(d.get("terminal", False)))
        for p, v in zip(d.get("points", []), d.get("values", [])):
            obj.add_point(p, v)
        return obj


def lower_eval(approx: LowerApprox, x):
    return approx.evaluate(x)


def upper_eval(approx: UpperApprox, x):
    return approx.evaluate(x)
