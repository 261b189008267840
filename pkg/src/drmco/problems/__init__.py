"""Benchmark instance generators.

Each builder returns ``(instance, sampler)`` where ``sampler.sample(rng, n)``
draws ``n`` iid paths as a list of ``(n, dim_xi)`` arrays for stages 2..T.
"""

from .hydro import HydroParams, InflowSampler, build_hydro
from .inventory import DemandSampler, InventoryParams, PriceSampler, build_inventory_demand, build_inventory_price
from .toy import build_affine_toy

BUILDERS = {
    "inventory_demand": build_inventory_demand,
    "inventory_price": build_inventory_price,
    "hydro": build_hydro,
}


def build(problem, params=None, data_seed=0, n=5):
    try:
        builder = BUILDERS[problem]
    except KeyError:
        raise ValueError(f"unknown problem {problem!r}; choose from {sorted(BUILDERS)}") from None
    return builder(params, data_seed=data_seed, n=n)


__all__ = [
    "BUILDERS",
    "DemandSampler",
    "HydroParams",
    "InflowSampler",
    "InventoryParams",
    "PriceSampler",
    "build",
    "build_affine_toy",
    "build_hydro",
    "build_inventory_demand",
    "build_inventory_price",
]
