"""Random program instances for oracle comparisons."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ponmpc.opt.program import LpInstance, build_mpc_program
from ponmpc.vq import SlotConfig, TrafficClassSpec, VirtualQueueBank


@dataclass(frozen=True)
class SampledInstance:
    banks: tuple[VirtualQueueBank, ...]
    specs: tuple[TrafficClassSpec, ...]
    slot_cfg: SlotConfig
    arrivals: tuple[tuple[int, ...], ...]
    program: LpInstance
    box_size: int


def _sparse_ints(rng: np.random.Generator, n: int, hi: int, p_zero: float) -> list[int]:
    vals = rng.integers(1, hi + 1, n)
    vals[rng.random(n) < p_zero] = 0
    return [int(v) for v in vals]


def box_size(inst: LpInstance, cap: int) -> int:
    """Integer points in the box a brute-force search would visit, capped at ``cap + 1``."""
    ub = inst.upper_bounds()
    size = 1
    for j in range(inst.n_vars):
        size *= int(ub[j]) + 1 if j not in inst.fixed else 1
        if size > cap:
            return cap + 1
    return size


def random_instance(rng: np.random.Generator, max_classes: int = 3, max_k: int = 5,
                    max_horizon: int = 4, max_value: int = 20, max_box: int = 200_000,
                    horizon: int | None = None, max_tries: int = 10_000) -> SampledInstance:
    """Draw an instance whose brute-force box has at most ``max_box`` points.

    Queue states, predicted arrivals, the slot budget and SLA budgets are
    integers in ``[0, max_value]``; a per-instance zero probability keeps a
    useful share of draws small enough to enumerate.
    """
    for _ in range(max_tries):
        n_cls = int(rng.integers(1, max_classes + 1))
        H = int(rng.integers(0, max_horizon + 1)) if horizon is None else horizon
        ks = [int(k) for k in rng.integers(1, max_k + 1, n_cls)]
        p_zero = float(rng.uniform(0.3, 0.9))
        lam = int(rng.integers(0, max_value + 1))
        banks = tuple(VirtualQueueBank(tuple(_sparse_ints(rng, k, max_value, p_zero))) for k in ks)
        specs = tuple(TrafficClassSpec(c + 1, 0.0, 0.0, k, int(rng.integers(0, max_value + 1)))
                      for c, k in enumerate(ks))
        arrivals = tuple(tuple(_sparse_ints(rng, H, max_value, p_zero)) for _ in ks)
        cfg = SlotConfig(horizon=H, capacity_packets=lam)
        prog = build_mpc_program(banks, specs, cfg, arrivals)
        size = box_size(prog, max_box)
        if size <= max_box:
            return SampledInstance(banks, specs, cfg, arrivals, prog, size)
    raise RuntimeError(f"no instance within {max_box} box points after {max_tries} draws")
