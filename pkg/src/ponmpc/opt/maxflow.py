"""Max-flow (Dinic) and the myopic one-slot allocation network."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ponmpc.opt.program import AllocationMatrix, forced_allocations
from ponmpc.vq import SlotConfig, VirtualQueueBank


class NegativeBudgetError(ValueError):
    pass


@dataclass
class FlowNetwork:
    """Directed multigraph with integral capacities; parallel edges allowed."""

    source: str = "S"
    sink: str = "T"
    nodes: list[str] = field(default_factory=list)
    edges: list[tuple[str, str, int]] = field(default_factory=list)

    def __post_init__(self):
        for name in (self.source, self.sink):
            if name not in self.nodes:
                self.nodes.append(name)

    def add_node(self, name: str):
        if name not in self.nodes:
            self.nodes.append(name)

    def add_edge(self, u: str, v: str, cap: int) -> int:
        if cap < 0:
            raise ValueError(f"negative capacity on {u}->{v}")
        if v == self.source or u == self.sink:
            raise ValueError("source must have no in-edges and sink no out-edges")
        self.add_node(u)
        self.add_node(v)
        self.edges.append((u, v, int(cap)))
        return len(self.edges) - 1

    def dump(self) -> str:
        return "\n".join(f"{u} -> {v} cap {c}" for u, v, c in self.edges)


class _Residual:
    def __init__(self, net: FlowNetwork):
        self.idx = {n: i for i, n in enumerate(net.nodes)}
        self.adj: list[list[int]] = [[] for _ in net.nodes]
        self.to: list[int] = []
        self.cap: list[int] = []
        for u, v, c in net.edges:
            a, b = self.idx[u], self.idx[v]
            self.adj[a].append(len(self.to))
            self.to.append(b)
            self.cap.append(c)
            self.adj[b].append(len(self.to))
            self.to.append(a)
            self.cap.append(0)

    def levels(self, s: int) -> list[int]:
        level = [-1] * len(self.adj)
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for e in self.adj[u]:
                if self.cap[e] > 0 and level[self.to[e]] < 0:
                    level[self.to[e]] = level[u] + 1
                    q.append(self.to[e])
        return level

    def augment(self, u: int, t: int, pushed: int, level, it) -> int:
        if u == t:
            return pushed
        while it[u] < len(self.adj[u]):
            e = self.adj[u][it[u]]
            v = self.to[e]
            if self.cap[e] > 0 and level[v] == level[u] + 1:
                got = self.augment(v, t, min(pushed, self.cap[e]), level, it)
                if got:
                    self.cap[e] -= got
                    self.cap[e ^ 1] += got
                    return got
            it[u] += 1
        return 0


def max_flow(net: FlowNetwork) -> tuple[int, list[int]]:
    """Dinic's blocking-flow algorithm; returns value and flow per edge."""
    res = _Residual(net)
    s, t = res.idx[net.source], res.idx[net.sink]
    total = 0
    while True:
        level = res.levels(s)
        if level[t] < 0:
            break
        it = [0] * len(res.adj)
        while True:
            pushed = res.augment(s, t, 1 << 62, level, it)
            if not pushed:
                break
            total += pushed
    flows = [res.cap[2 * k + 1] for k in range(len(net.edges))]
    return total, flows


def min_cut(net: FlowNetwork, flows: list[int]) -> tuple[set[str], int]:
    """Source side of the cut left by a maximum flow, and its capacity."""
    out: dict[str, list[str]] = {n: [] for n in net.nodes}
    for (u, v, c), f in zip(net.edges, flows):
        if f < c:
            out[u].append(v)
        if f > 0:
            out[v].append(u)
    seen = {net.source}
    q = deque([net.source])
    while q:
        u = q.popleft()
        for v in out[u]:
            if v not in seen:
                seen.add(v)
                q.append(v)
    cap = sum(c for u, v, c in net.edges if u in seen and v not in seen)
    return seen, cap


def myopic_network(banks, specs, capacity: int, forced: list[int]
                   ) -> tuple[FlowNetwork, dict[int, tuple[int, int]]]:
    """Per-class ``S -> S^c -> T1^c`` queue edges, budget edges into a shared
    ``T2`` and the slot-capacity edge ``T2 -> T``.

    Returns the network and a map from edge index to ``(class, queue)``.
    """
    net = FlowNetwork()
    queue_edges: dict[int, tuple[int, int]] = {}
    used = sum(forced)
    if used > capacity:
        raise NegativeBudgetError(f"forced service {used} exceeds capacity {capacity}")
    for c, (bank, spec) in enumerate(zip(banks, specs)):
        budget = min(capacity, spec.lambda_c_packets) - forced[c]
        if budget < 0:
            raise NegativeBudgetError(f"class {c}: forced service exceeds its budget")
        sc, t1 = f"S{c + 1}", f"T1_{c + 1}"
        net.add_edge("S", sc, sum(bank.q[1:]))
        for i in range(2, bank.k + 1):
            queue_edges[net.add_edge(sc, t1, bank[i - 1])] = (c, i)
        net.add_edge(t1, "T2", budget)
    net.add_edge("T2", "T", capacity - used)
    return net, queue_edges


def solve_myopic_maxflow(banks, specs, slot_cfg: SlotConfig,
                         capacity: int | None = None) -> AllocationMatrix:
    """One-slot optimum via max-flow.

    ``objective`` on the result is the flow value, which excludes the forced
    Q_1 service exactly as the LP objective does.
    """
    banks = [b if isinstance(b, VirtualQueueBank) else VirtualQueueBank(tuple(b)) for b in banks]
    lam = slot_cfg.capacity if capacity is None else capacity
    forced = forced_allocations(banks, specs, lam)
    net, queue_edges = myopic_network(banks, specs, lam, forced)
    value, flows = max_flow(net)
    x = [np.zeros((s.k_slots, 1), dtype=np.int64) for s in specs]
    for c, x1 in enumerate(forced):
        x[c][0, 0] = x1
    for e, (c, i) in queue_edges.items():
        x[c][i - 1, 0] = flows[e]
    return AllocationMatrix(x, float(value))
