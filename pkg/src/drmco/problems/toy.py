"""Two-stage toy whose recourse value is affine in the uncertainty.

Stage 1 orders ``x`` at unit cost; stage 2 pays ``b'xi`` plus a penalty on the
shortfall ``max(d - x, 0)``. The ``b'xi`` term can be written either in the
objective (fixed unit variable with cost ``b'xi``) or in a right-hand side
(variable pinned to ``b'xi`` by an equality), which gives one instance for
each oracle with identical optimal values.
"""

from __future__ import annotations

import numpy as np

from ..measures import DiscreteMeasure
from ..model import AmbiguitySpec, ConstraintBlock, Instance, StageModel, UncertaintySet


def _first_stage(order_cost, cap):
    return StageModel(
        index=1,
        dim_in=1,
        dim_out=1,
        dim_internal=0,
        cost_matrix=np.zeros((1, 1)),
        cost_vector=np.array([order_cost]),
        ineq=ConstraintBlock.empty(1, 0, 1, 1),
        eq=ConstraintBlock.empty(1, 0, 1, 1),
        internal_lower=np.zeros(0),
        internal_upper=np.zeros(0),
        state_lower=np.zeros(1),
        state_upper=np.array([cap]),
        uncertainty=UncertaintySet([0.0], [0.0]),
    )


def build_affine_toy(encoding="objective", radius=0.0, atoms=((0.5,),), slopes=(1.0,), shortfall=0.0, penalty=3.0, order_cost=1.0, cap=None):
    """Return the toy instance with a Wasserstein ball of ``radius`` around ``atoms``.

    ``encoding`` is ``"objective"`` (concave-oracle route) or ``"rhs"``
    (convex-oracle route). The uncertainty box is ``[0, 1]^len(slopes)``.
    """
    b = np.asarray(slopes, dtype=float)
    d = b.size
    cap = 2.0 * shortfall + 1.0 if cap is None else cap
    # internal (u, r): u carries b'xi, r is the shortfall
    shortfall_row = ConstraintBlock(np.array([[-1.0]]), np.array([[0.0, -1.0]]), np.zeros((1, 1)), np.array([-shortfall]), np.zeros((1, d)))
    if encoding == "objective":
        A = np.zeros((3, d))
        A[0] = b
        cost = np.array([0.0, penalty, 0.0])
        eq = ConstraintBlock.empty(1, 2, 1, d)
        lo, hi = np.array([1.0, 0.0]), np.array([1.0, np.inf])
    elif encoding == "rhs":
        A = np.zeros((3, d))
        cost = np.array([1.0, penalty, 0.0])
        eq = ConstraintBlock(np.zeros((1, 1)), np.array([[1.0, 0.0]]), np.zeros((1, 1)), np.zeros(1), b[None, :])
        lo, hi = np.array([-np.inf, 0.0]), np.array([np.inf, np.inf])
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    second = StageModel(
        index=2,
        dim_in=1,
        dim_out=1,
        dim_internal=2,
        cost_matrix=A,
        cost_vector=cost,
        ineq=shortfall_row,
        eq=eq,
        internal_lower=lo,
        internal_upper=hi,
        state_lower=np.zeros(1),
        state_upper=np.zeros(1),
        uncertainty=UncertaintySet(np.zeros(d), np.ones(d)),
        declared={"lipschitz_state": penalty, "lipschitz_uncertainty": float(np.abs(b).max())},
    )
    return Instance(
        stages=[_first_stage(order_cost, cap), second],
        ambiguity=[AmbiguitySpec("wasserstein", radius)],
        data=[DiscreteMeasure(np.asarray(atoms, dtype=float))],
        x0=np.zeros(1),
        xi1=np.zeros(1),
        regularization=[penalty, penalty],
        name=f"affine_toy_{encoding}",
    )
