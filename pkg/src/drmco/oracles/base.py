"""Common output type and helpers for the noninitial-stage oracles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..approx import Cut


@dataclass
class OracleOutput:
    """Result of one oracle call at an incoming state ``x_prev``.

    ``cut`` underestimates the cost-to-go of the previous stage, ``overestimate``
    bounds it from above at ``x_prev``, and ``next_state``/``gap`` continue the
    forward pass. ``outcome_states``/``outcome_gaps`` hold one entry per data
    outcome for sampled forward passes.
    """

    cut: Cut
    overestimate: float
    next_state: np.ndarray
    gap: float
    value: float
    outcome_states: list = field(default_factory=list)
    outcome_gaps: list = field(default_factory=list)


def gap_at(lower, upper, x):
    """``upper(x) - lower(x)``; infinite while the upper approximation is empty."""
    up = upper.evaluate(x)
    if not np.isfinite(up):
        return np.inf
    return max(up - lower.evaluate(x), 0.0)


def first_argmax(values):
    """Index of the largest entry, lowest index on ties (infinities included)."""
    values = np.asarray(values, dtype=float)
    return int(np.flatnonzero(values == values.max())[0])
