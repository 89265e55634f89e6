"""Batch cross-checks of the optimization layer against independent solvers."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ponmpc.opt.ilp import brute_force_ilp
from ponmpc.opt.maxflow import solve_myopic_maxflow
from ponmpc.opt.program import _program_structure
from ponmpc.opt.sampling import random_instance
from ponmpc.opt.simplex import solve_lp
from ponmpc.opt.tu import check_totally_unimodular_ghouila_houri, reduce_by_unit_rows


@dataclass
class BatchResult:
    name: str
    checked: int = 0
    failures: list[str] = field(default_factory=list)
    seconds: float = 0.0
    notes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.checked > 0 and not self.failures

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = " ".join(f"{k}={v}" for k, v in self.notes.items())
        return (f"{status} {self.name}: {self.checked} checked, {len(self.failures)} failed, "
                f"{self.seconds:.1f}s {extra}").rstrip()


def lp_ilp_batch(n: int = 1000, seed: int = 0, max_box: int = 200_000) -> BatchResult:
    """Simplex optimum vs exhaustive integer optimum on random programs."""
    res = BatchResult("lp-vs-ilp")
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    free_vars = []
    for k in range(n):
        s = random_instance(rng, max_box=max_box)
        try:
            lp, x = solve_lp(s.program)
        except Exception as exc:     # any solver failure counts against the batch
            res.failures.append(f"#{k}: {type(exc).__name__}: {exc}")
            continue
        ilp = brute_force_ilp(s.program)
        if lp != ilp:
            res.failures.append(f"#{k}: lp {lp} != ilp {ilp}")
        res.checked += 1
        ub = s.program.upper_bounds()
        free_vars.append(sum(1 for j in range(ub.size) if ub[j] > 0 and j not in s.program.fixed))
    res.seconds = time.perf_counter() - start
    if free_vars:
        res.notes = {"max_free_vars": max(free_vars), "mean_free_vars": round(float(np.mean(free_vars)), 2)}
    return res


def maxflow_batch(n: int = 1000, seed: int = 1, max_box: int = 200_000) -> BatchResult:
    """One-slot programs: max-flow value vs simplex vs exhaustive search."""
    res = BatchResult("maxflow-vs-lp-vs-ilp")
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    for k in range(n):
        s = random_instance(rng, horizon=0, max_box=max_box)
        try:
            flow = solve_myopic_maxflow(s.banks, s.specs, s.slot_cfg).objective
            lp, _ = solve_lp(s.program)
        except Exception as exc:
            res.failures.append(f"#{k}: {type(exc).__name__}: {exc}")
            continue
        ilp = brute_force_ilp(s.program)
        if not flow == lp == ilp:
            res.failures.append(f"#{k}: flow {flow}, lp {lp}, ilp {ilp}")
        res.checked += 1
    res.seconds = time.perf_counter() - start
    return res


def program_matrix(k: int, horizon: int) -> np.ndarray:
    """Constraint matrix of the single-class program (independent of data)."""
    return np.array(_program_structure((k,), horizon)[0])


def tu_batch(max_k: int = 3, max_horizon: int = 3) -> BatchResult:
    """Ghouila-Houri on every single-class program matrix up to the given size,
    both as built and after unit-row reduction, plus a known non-TU control."""
    res = BatchResult("ghouila-houri")
    start = time.perf_counter()
    for k in range(1, max_k + 1):
        for h in range(max_horizon + 1):
            a = program_matrix(k, h)
            for label, m in (("full", a), ("reduced", reduce_by_unit_rows(a))):
                res.checked += 1
                if not check_totally_unimodular_ghouila_houri(m):
                    res.failures.append(f"K={k} H={h} {label} reported non-TU")
    res.checked += 1
    if check_totally_unimodular_ghouila_houri([[1, 1], [1, -1]]):
        res.failures.append("[[1,1],[1,-1]] reported TU")
    res.seconds = time.perf_counter() - start
    return res
