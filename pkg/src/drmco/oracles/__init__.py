"""Noninitial-stage oracles and a factory choosing one per stage."""

from __future__ import annotations

from ..model import Instance, OracleKind, oracle_kind
from ..stage import StageSubproblem
from . import baselines, concave, convex
from .base import OracleOutput

__all__ = ["OracleOutput", "StageOracle", "make_oracles", "baselines", "concave", "convex"]


class StageOracle:
    """Callable ``(x_prev, lower, upper) -> OracleOutput`` for one stage of an instance."""

    def __init__(self, instance: Instance, t: int, vertex_cap=convex.VERTEX_CAP):
        self.instance = instance
        self.t = t  # 1-based stage index, t >= 2
        self.stage = instance.stages[t - 1]
        self.ambiguity = instance.ambiguity[t - 2]
        self.data = instance.data[t - 2]
        self.M = instance.regularization[t - 1]
        kind = self.ambiguity.kind
        if kind == "wasserstein":
            self.route = "concave" if oracle_kind(self.stage) is OracleKind.CONCAVE else "convex"
        elif kind == "robust":
            self.route = "robust"
        else:
            self.route = "cvar"
        self.vertices = None
        self.rate = None
        if self.route == "convex":
            self.vertices = [convex.lifted_vertices(self.stage.uncertainty, a, self.ambiguity.metric, vertex_cap) for a in self.data.atoms]
            self.rate = convex.growth_rate(self.stage)
        elif self.route == "robust":
            self.vertices = self.stage.uncertainty.vertices()
        self._sub = None
        self._sub_version = None

    def _subproblem(self, lower):
        key = (id(lower), lower.version)
        if self._sub is None or self._sub_version != key:
            self._sub = StageSubproblem(self.stage, lower, self.M)
            self._sub_version = key
        return self._sub

    def __call__(self, x_prev, lower, upper) -> OracleOutput:
        if self.route == "concave":
            return concave.evaluate(self.stage, self.ambiguity, self.data, lower, upper, x_prev, self.M)
        sub = self._subproblem(lower)
        if self.route == "convex":
            return convex.evaluate(self.stage, self.ambiguity, self.data, lower, upper, x_prev, self.M, self.vertices, self.rate, sub)
        if self.route == "robust":
            return baselines.mrco_evaluate(self.stage, lower, upper, x_prev, self.M, self.vertices, sub)
        return baselines.cvar_evaluate(self.stage, self.ambiguity, self.data, lower, upper, x_prev, self.M, sub)


def make_oracles(instance: Instance, vertex_cap=convex.VERTEX_CAP):
    """One oracle per stage; index 0 (the first stage) is ``None``."""
    return [None] + [StageOracle(instance, t, vertex_cap) for t in range(2, instance.T + 1)]
