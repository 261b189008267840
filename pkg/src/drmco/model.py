"""Canonical multistage instance: stage LPs, ambiguity specifications, checks.

Stage ``t`` has cost function

    f_t(x_prev, x; xi) = const + min_y (A xi + a)'(y, x)
        s.t.  E x_prev + F y + G x <= h + H xi      (inequality block)
              E x_prev + F y + G x  = h + H xi      (equality block)
              y, x within their boxes

Uncertainty enters either the objective (``A`` nonzero) or the right-hand
side (``H`` nonzero), never both. The objective acts on the stacked decision
``(y, x)`` so that costs on the outgoing state need no copy variables.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import MixedUncertainty, UnboundedLipschitz
from .measures import DiscreteMeasure

AMBIGUITY_KINDS = ("wasserstein", "cvar", "robust", "nominal")
METRICS = ("L1", "Linf")


class OracleKind(str, enum.Enum):
    CONCAVE = "concave"
    CONVEX = "convex"


def _arr(v, shape=None):
    a = np.asarray([] if v is None else v, dtype=float)
    if shape is not None:
        a = a.reshape(shape)
    return a


@dataclass
class ConstraintBlock:
    """Rows ``E x_prev + F y + G x (<= or =) h + H xi``."""

    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    h: np.ndarray
    H: np.ndarray

    @classmethod
    def empty(cls, dim_in, dim_internal, dim_out, dim_xi):
        z = lambda c: np.zeros((0, c))
        return cls(z(dim_in), z(dim_internal), z(dim_out), np.zeros(0), z(dim_xi))

    @property
    def rows(self):
        return self.h.size

    def decision_matrix(self):
        return np.hstack([self.F, self.G])

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("E", "F", "G", "h", "H")}

    @classmethod
    def from_dict(cls, d, dim_in, dim_internal, dim_out, dim_xi):
        h = _arr(d.get("h"))
        r = h.size
        return cls(
            _arr(d.get("E"), (r, dim_in)),
            _arr(d.get("F"), (r, dim_internal)),
            _arr(d.get("G"), (r, dim_out)),
            h,
            _arr(d.get("H"), (r, dim_xi)),
        )


@dataclass
class UncertaintySet:
    """Box ``lower <= xi <= upper``; an infinite upper bound makes a coordinate unbounded."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()

    @property
    def dim(self):
        return self.lower.size

    @property
    def bounded(self):
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def contains(self, xi, tol=1e-9):
        xi = np.asarray(xi, dtype=float)
        return bool(np.all(xi >= self.lower - tol) and np.all(xi <= self.upper + tol))

    def vertices(self):
        """Corners of a bounded box (duplicates removed when a side is degenerate)."""
        if not self.bounded:
            raise ValueError("unbounded uncertainty set has no vertex list")
        grids = [sorted({lo, hi}) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*grids, indexing="ij") if grids else []
        return np.stack([m.ravel() for m in mesh], axis=1) if grids else np.zeros((1, 0))


@dataclass
class StageModel:
    """Data of one stage. Decision order inside the stage is ``(y, x)``."""

    index: int
    dim_in: int
    dim_out: int
    dim_internal: int
    cost_matrix: np.ndarray  # A, shape (dim_internal + dim_out, dim_xi)
    cost_vector: np.ndarray  # a
    ineq: ConstraintBlock
    eq: ConstraintBlock
    internal_lower: np.ndarray
    internal_upper: np.ndarray
    state_lower: np.ndarray
    state_upper: np.ndarray
    uncertainty: UncertaintySet
    cost_constant: float = 0.0
    declared: dict = field(default_factory=dict)

    @property
    def dim_xi(self):
        return self.uncertainty.dim

    @property
    def n_decisions(self):
        return self.dim_internal + self.dim_out

    def decision_bounds(self):
        lo = np.concatenate([self.internal_lower, self.state_lower])
        hi = np.concatenate([self.internal_upper, self.state_upper])
        return lo, hi

    def cost(self, xi):
        return self.cost_vector + self.cost_matrix @ np.asarray(xi, dtype=float)

    def has_objective_uncertainty(self):
        return bool(np.any(self.cost_matrix != 0))

    def has_rhs_uncertainty(self):
        return bool(np.any(self.ineq.H != 0) or np.any(self.eq.H != 0))

    def to_dict(self):
        inf_to_none = lambda a: [None if not np.isfinite(v) else float(v) for v in a]
        return {
            "index": self.index,
            "dim_in": self.dim_in,
            "dim_out": self.dim_out,
            "dim_internal": self.dim_internal,
            "cost_matrix": self.cost_matrix.tolist(),
            "cost_vector": self.cost_vector.tolist(),
            "cost_constant": self.cost_constant,
            "ineq": self.ineq.to_dict(),
            "eq": self.eq.to_dict(),
            "internal_lower": inf_to_none(self.internal_lower),
            "internal_upper": inf_to_none(self.internal_upper),
            "state_lower": inf_to_none(self.state_lower),
            "state_upper": inf_to_none(self.state_upper),
            "uncertainty": {
                "lower": inf_to_none(self.uncertainty.lower),
                "upper": inf_to_none(self.uncertainty.upper),
            },
            "declared": self.declared,
        }

    @classmethod
    def from_dict(cls, d):
        def bounds(values, default):
            return np.array([default if v is None else float(v) for v in values], dtype=float)

        dim_in, dim_out, dim_int = int(d["dim_in"]), int(d["dim_out"]), int(d["dim_internal"])
        unc = d["uncertainty"]
        dim_xi = len(unc["lower"])
        nd = dim_int + dim_out
        return cls(
            index=int(d["index"]),
            dim_in=dim_in,
            dim_out=dim_out,
            dim_internal=dim_int,
            cost_matrix=_arr(d["cost_matrix"], (nd, dim_xi)),
            cost_vector=_arr(d["cost_vector"], (nd,)),
            cost_constant=float(d.get("cost_constant", 0.0)),
            ineq=ConstraintBlock.from_dict(d.get("ineq", {}), dim_in, dim_int, dim_out, dim_xi),
            eq=ConstraintBlock.from_dict(d.get("eq", {}), dim_in, dim_int, dim_out, dim_xi),
            internal_lower=bounds(d["internal_lower"], -np.inf),
            internal_upper=bounds(d["internal_upper"], np.inf),
            state_lower=bounds(d["state_lower"], -np.inf),
            state_upper=bounds(d["state_upper"], np.inf),
            uncertainty=UncertaintySet(bounds(unc["lower"], -np.inf), bounds(unc["upper"], np.inf)),
            declared=dict(d.get("declared", {})),
        )


@dataclass
class MomentConstraint:
    """Affine moment bound ``E_p[b'xi + offset] <= bound``."""

    b: np.ndarray
    offset: float
    bound: float

    def __call__(self, xi):
        return float(np.asarray(self.b) @ np.asarray(xi, dtype=float) + self.offset)


@dataclass
class AmbiguitySpec:
    kind: str = "nominal"
    radius: float = 0.0
    moments: list = field(default_factory=list)
    alpha: float = 0.05
    beta: float = 1.0
    metric: str = "L1"

    def to_dict(self):
        return {
            "kind": self.kind,
            "radius": self.radius,
            "moments": [
                {"b": np.asarray(m.b, dtype=float).tolist(), "offset": m.offset, "bound": m.bound}
                for m in self.moments
            ],
            "alpha": self.alpha,
            "beta": self.beta,
            "metric": self.metric,
        }

    @classmethod
    def from_dict(cls, d):
        moments = [MomentConstraint(np.asarray(m["b"], dtype=float), float(m.get("offset", 0.0)), float(m["bound"])) for m in d.get("moments", [])]
        return cls(
            kind=d.get("kind", "nominal"),
            radius=float(d.get("radius", 0.0)),
            moments=moments,
            alpha=float(d.get("alpha", 0.05)),
            beta=float(d.get("beta", 1.0)),
            metric=d.get("metric", "L1"),
        )


@dataclass
class Instance:
    """A T-stage problem. ``ambiguity`` and ``data`` cover stages 2..T."""

    stages: list
    ambiguity: list
    data: list
    x0: np.ndarray
    xi1: np.ndarray
    regularization: list
    name: str = "instance"

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).ravel()
        self.xi1 = np.asarray(self.xi1, dtype=float).ravel()
        self.regularization = [float(m) for m in self.regularization]

    @property
    def T(self):
        return len(self.stages)

    def with_ambiguity(self, specs, data=None, name=None):
        """Copy with new ambiguity specs (one per stage 2..T or a single shared spec)."""
        if isinstance(specs, AmbiguitySpec):
            specs = [replace(specs) for _ in range(self.T - 1)]
        return replace(self, ambiguity=list(specs), data=list(data) if data is not None else self.data, name=name or self.name)

    def to_dict(self):
        return {
            "name": self.name,
            "stages": [s.to_dict() for s in self.stages],
            "ambiguity": [a.to_dict() for a in self.ambiguity],
            "data": [{"atoms": m.atoms.tolist(), "weights": m.weights.tolist()} for m in self.data],
            "x0": self.x0.tolist(),
            "xi1": self.xi1.tolist(),
            "regularization": list(self.regularization),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            stages=[StageModel.from_dict(s) for s in d["stages"]],
            ambiguity=[AmbiguitySpec.from_dict(a) for a in d.get("ambiguity", [])],
            data=[DiscreteMeasure(np.asarray(m["atoms"], dtype=float), m.get("weights")) for m in d.get("data", [])],
            x0=d["x0"],
            xi1=d["xi1"],
            regularization=d["regularization"],
            name=d.get("name", "instance"),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def oracle_kind(stage: StageModel) -> OracleKind:
    obj, rhs = stage.has_objective_uncertainty(), stage.has_rhs_uncertainty()
    if obj and rhs:
        raise MixedUncertainty(f"stage {stage.index} has uncertainty in objective and right-hand side")
    return OracleKind.CONCAVE if obj else OracleKind.CONVEX


def _stage_findings(s: StageModel):
    out = []
    tag = f"stage {s.index}"
    nd = s.n_decisions
    for name, blk in (("ineq", s.ineq), ("eq", s.eq)):
        r = blk.rows
        shapes = {"E": (r, s.dim_in), "F": (r, s.dim_internal), "G": (r, s.dim_out), "H": (r, s.dim_xi)}
        for key, shape in shapes.items():
            if getattr(blk, key).shape != shape:
                out.append(f"{tag}: {name}.{key}: shape {getattr(blk, key).shape} != {shape}")
    if s.cost_matrix.shape != (nd, s.dim_xi):
        out.append(f"{tag}: cost_matrix: shape {s.cost_matrix.shape} != {(nd, s.dim_xi)}")
    if s.cost_vector.shape != (nd,):
        out.append(f"{tag}: cost_vector: length {s.cost_vector.size} != {nd}")
    if s.state_lower.size != s.dim_out or s.state_upper.size != s.dim_out:
        out.append(f"{tag}: state bounds: length must equal dim_out")
    elif not (np.all(np.isfinite(s.state_lower)) and np.all(np.isfinite(s.state_upper))):
        out.append(f"{tag}: state bounds: must be finite (compact state space)")
    elif np.any(s.state_lower > s.state_upper):
        out.append(f"{tag}: state bounds: lower exceeds upper")
    if s.internal_lower.size != s.dim_internal or s.internal_upper.size != s.dim_internal:
        out.append(f"{tag}: internal bounds: length must equal dim_internal")
    elif np.any(s.internal_lower > s.internal_upper):
        out.append(f"{tag}: internal bounds: lower exceeds upper")
    if s.has_objective_uncertainty() and s.has_rhs_uncertainty():
        out.append(f"{tag}: uncertainty: objective and right-hand side uncertainty are mutually exclusive")
    if np.any(s.uncertainty.lower > s.uncertainty.upper):
        out.append(f"{tag}: uncertainty: lower exceeds upper")
    if not np.all(np.isfinite(s.uncertainty.lower)):
        out.append(f"{tag}: uncertainty: lower bounds must be finite (box or orthant)")
    if s.index >= 2 and s.dim_xi < 1:
        out.append(f"{tag}: uncertainty: dimension must be at least 1")
    return out


def validate(instance: Instance) -> list:
    """Return human-readable violations; an empty list means the instance is well formed."""
    out = []
    T = instance.T
    for i, s in enumerate(instance.stages):
        if s.index != i + 1:
            out.append(f"stage {i + 1}: index: recorded as {s.index}")
        out.extend(_stage_findings(s))
        if i + 1 < T and s.dim_out != instance.stages[i + 1].dim_in:
            out.append(f"stage {i + 1}: dim_out: differs from dim_in of stage {i + 2}")
    if T and instance.x0.size != instance.stages[0].dim_in:
        out.append("stage 1: x0: length differs from dim_in")
    if T and instance.xi1.size != instance.stages[0].dim_xi:
        out.append("stage 1: xi1: length differs from uncertainty dimension")
    if len(instance.regularization) != T:
        out.append(f"instance: regularization: expected {T} entries")
    else:
        for t, m in enumerate(instance.regularization, start=1):
            if not m > 0:
                out.append(f"stage {t}: regularization: must be positive")
    if len(instance.ambiguity) != T - 1:
        out.append(f"instance: ambiguity: expected {T - 1} entries")
    if len(instance.data) != T - 1:
        out.append(f"instance: data: expected {T - 1} entries")
        return out
    for t in range(2, T + 1):
        s = instance.stages[t - 1]
        nu = instance.data[t - 2]
        if nu.n == 0:
            out.append(f"stage {t}: data: empty measure")
            continue
        if nu.dim != s.dim_xi:
            out.append(f"stage {t}: data: atom dimension {nu.dim} != {s.dim_xi}")
            continue
        if not all(s.uncertainty.contains(a) for a in nu.atoms):
            out.append(f"stage {t}: data: atoms must lie in the uncertainty set")
        if t - 2 >= len(instance.ambiguity):
            continue
        amb = instance.ambiguity[t - 2]
        if amb.kind not in AMBIGUITY_KINDS:
            out.append(f"stage {t}: ambiguity.kind: unknown {amb.kind!r}")
        if amb.metric not in METRICS:
            out.append(f"stage {t}: ambiguity.metric: unknown {amb.metric!r}")
        if amb.kind == "wasserstein":
            if amb.radius < 0:
                out.append(f"stage {t}: ambiguity.radius: must be nonnegative")
            for j, mc in enumerate(amb.moments, start=1):
                b = np.asarray(mc.b, dtype=float)
                if b.size != s.dim_xi:
                    out.append(f"stage {t}: ambiguity.moments[{j}]: expected an affine function of xi")
                    continue
                avg = float(nu.weights @ (nu.atoms @ b + mc.offset))
                if not mc.bound > avg:
                    out.append(f"stage {t}: ambiguity.moments[{j}]: bound {mc.bound} must exceed the empirical average {avg} (Slater point)")
        if amb.kind == "cvar":
            if not 0 < amb.alpha < 1:
                out.append(f"stage {t}: ambiguity.alpha: must lie in (0, 1)")
            if not 0 <= amb.beta <= 1:
                out.append(f"stage {t}: ambiguity.beta: must lie in [0, 1]")
    return out


def recommended_regularization(instance: Instance) -> list:
    """Per-stage upper bound on the state-Lipschitz constant of the stage value function.

    Uses the generator's declared ``lipschitz_state`` when present; otherwise a
    declared ``dual_bound`` B on the row multipliers gives ``B * max_i sum_r |E_ri|``;
    stages without any cost are 0-Lipschitz and receive 1.0.
    """
    out = []
    for s in instance.stages:
        d = s.declared
        if d.get("lipschitz_state") is not None:
            out.append(float(d["lipschitz_state"]))
        elif d.get("dual_bound") is not None:
            E = np.vstack([s.ineq.E, s.eq.E])
            col = np.abs(E).sum(axis=0).max() if E.size else 0.0
            out.append(max(float(d["dual_bound"]) * float(col), 1.0))
        elif not np.any(s.cost_vector) and not np.any(s.cost_matrix):
            out.append(1.0)
        else:
            raise UnboundedLipschitz(f"stage {s.index}: no Lipschitz bound declared; supply M_t")
    return out
