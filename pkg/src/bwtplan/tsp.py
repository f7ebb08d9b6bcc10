"""Open-ended tour ordering: nearest neighbour start, then 2-opt and Or-opt.

The open path is encoded as a cycle whose edges back into ``start`` cost
nothing, so the cycle cost equals the cost of the path it contains.
"""
import time
from dataclasses import dataclass

import numpy as np

from .errors import TourInfeasible


@dataclass
class TourProblem:
    cost: np.ndarray
    start: int = 0

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float)
        n = self.cost.shape[0]
        if self.cost.shape != (n, n):
            raise ValueError("cost matrix must be square")
        if not 0 <= self.start < n:
            raise ValueError("start out of range")

    @property
    def n(self):
        return self.cost.shape[0]

    @classmethod
    def open_path(cls, cost, start=0):
        """Copy of ``cost`` with every edge into ``start`` set to zero."""
        c = np.array(cost, dtype=float)
        c[:, start] = 0.0
        np.fill_diagonal(c, 0.0)
        return cls(c, start)


@dataclass
class TourResult:
    order: list
    cost: float

    def __iter__(self):
        return iter((self.order, self.cost))


def path_cost(cost, order):
    """Directed cost of visiting ``order`` without returning to its first vertex."""
    return float(sum(cost[a, b] for a, b in zip(order, order[1:])))


def cycle_cost(cost, order):
    return path_cost(cost, order) + float(cost[order[-1], order[0]])


def nearest_neighbor(cost, start):
    n = cost.shape[0]
    order = [start]
    left = set(range(n)) - {start}
    while left:
        cur = order[-1]
        nxt = min(left, key=lambda j: (cost[cur, j], j))
        order.append(nxt)
        left.remove(nxt)
    return order


def two_opt_pass(cost, order):
    """First-improvement 2-opt over the cycle with directed costs.

    Reversing ``order[i..j]`` changes the two boundary edges and flips the
    direction of every edge inside the segment, so the inner cost is taken
    from forward and backward prefix sums. Position 0 (the start) never moves.
    """
    n = len(order)
    o = np.asarray(order)
    fwd = np.concatenate([[0.0], np.cumsum(cost[o[:-1], o[1:]])])
    bwd = np.concatenate([[0.0], np.cumsum(cost[o[1:], o[:-1]])])
    for i in range(1, n - 1):
        a, b = order[i - 1], order[i]
        for j in range(i + 1, n):
            c, d = order[j], order[(j + 1) % n]
            old = cost[a, b] + cost[c, d] + fwd[j] - fwd[i]
            new = cost[a, c] + cost[b, d] + bwd[j] - bwd[i]
            if new < old - 1e-12:
                order[i:j + 1] = order[i:j + 1][::-1]
                return True
    return False


def or_opt_pass(cost, order, max_len=3):
    """Move a segment of 1..``max_len`` vertices elsewhere, optionally reversed."""
    n = len(order)
    for length in range(1, max_len + 1):
        for i in range(1, n - length + 1):
            seg = order[i:i + length]
            p, q = order[i - 1], order[(i + length) % n]
            inner_f = sum(cost[seg[k], seg[k + 1]] for k in range(length - 1))
            inner_b = sum(cost[seg[k + 1], seg[k]] for k in range(length - 1))
            removed = cost[p, seg[0]] + cost[seg[-1], q] + inner_f - cost[p, q]
            rest = order[:i] + order[i + length:]
            m = len(rest)
            for pos in range(1, m + 1):
                if pos == i:
                    continue
                u, v = rest[pos - 1], rest[pos % m]
                base = cost[u, v]
                fwd = cost[u, seg[0]] + inner_f + cost[seg[-1], v] - base
                rev = cost[u, seg[-1]] + inner_b + cost[seg[0], v] - base
                if fwd < removed - 1e-12 and fwd <= rev:
                    order[:] = rest[:pos] + seg + rest[pos:]
                    return True
                if rev < removed - 1e-12:
                    order[:] = rest[:pos] + seg[::-1] + rest[pos:]
                    return True
    return False


def local_search(cost, order):
    while True:
        if two_opt_pass(cost, order):
            continue
        if or_opt_pass(cost, order):
            continue
        return order


def solve(problem, seed=0, time_budget=None, restarts=8):
    """Order the vertices starting at ``problem.start``.

    Returns a :class:`TourResult` whose cost excludes the closing edge. The
    result is deterministic for a given seed unless ``time_budget`` (seconds)
    cuts the random restarts short.
    """
    cost = problem.cost
    n = problem.n
    if not np.all(np.isfinite(cost)):
        raise TourInfeasible()
    s = problem.start
    if n == 1:
        return TourResult([s], 0.0)
    best = local_search(cost, nearest_neighbor(cost, s))
    best_cost = cycle_cost(cost, best)
    rng = np.random.default_rng(seed)
    deadline = None if time_budget is None else time.perf_counter() + time_budget
    others = [v for v in range(n) if v != s]
    for _ in range(restarts if n > 3 else 0):
        if deadline is not None and time.perf_counter() > deadline:
            break
        order = [s] + [others[k] for k in rng.permutation(len(others))]
        order = local_search(cost, order)
        c = cycle_cost(cost, order)
        if c < best_cost - 1e-12:
            best, best_cost = order, c
    return TourResult(best, path_cost(cost, best))


def dump(problem, result, stream):
    """Plain-text matrix and tour for cross-checking against other solvers."""
    stream.write(f"DIMENSION {problem.n}\nSTART {problem.start}\nMATRIX\n")
    for row in problem.cost:
        stream.write(" ".join(f"{v:.6f}" for v in row) + "\n")
    stream.write("TOUR " + " ".join(str(v) for v in result.order) + f"\nCOST {result.cost:.6f}\n")
