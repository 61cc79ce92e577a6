"""Slow, independent reference computations used as test oracles.

Nothing here imports the package's numeric code paths; each function is a
plain scalar loop over the defining formula.
"""

from __future__ import annotations

import math


def blend_loop(a, wa, b, wb):
    h, w = len(a), len(a[0])
    return [[(a[i][j] * wa[i][j] + b[i][j] * wb[i][j]) / (wa[i][j] + wb[i][j]) for j in range(w)] for i in range(h)]


def weighted_mean_loop(maps, weights):
    h, w = len(maps[0]), len(maps[0][0])
    out = []
    for i in range(h):
        row = []
        for j in range(w):
            num = sum(m[i][j] * wt[i][j] for m, wt in zip(maps, weights))
            den = sum(wt[i][j] for wt in weights)
            row.append(num / den)
        out.append(row)
    return out


def simple_paths(h, w, src, dst):
    """Every simple 4-connected path from src to dst (depth-first enumeration)."""
    out = []
    path = [src]
    seen = {src}

    def dfs(u):
        if u == dst:
            out.append(list(path))
            return
        r, c = u
        for v in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= v[0] < h and 0 <= v[1] < w and v not in seen:
                seen.add(v)
                path.append(v)
                dfs(v)
                path.pop()
                seen.discard(v)

    dfs(src)
    return out


def enumerate_graph_cost(values, src, dst, theta, aux):
    """Minimum of sum (1 - T)^2 + aux*(len-1) over theta-feasible simple paths.

    Each path is summed in traversal order (first vertex alone, then vertex
    cost plus step cost per move) so equal paths give bit-identical totals.
    """
    h, w = len(values), len(values[0])
    best = math.inf
    best_path = None
    for p in simple_paths(h, w, src, dst):
        if any(values[r][c] < theta for r, c in p):
            continue
        r0, c0 = p[0]
        cost = (1.0 - values[r0][c0]) ** 2
        for r, c in p[1:]:
            cost += (1.0 - values[r][c]) ** 2 + aux
        if cost < best:
            best, best_path = cost, p
    return best, best_path


def primitive_scores(paths, dists_to_goal, robot_to_goal, horizon, lam, values):
    """Per-candidate j_trav + lam * clamped j_dis from raw cells and distances."""
    scores = []
    for cells, closest in zip(paths, dists_to_goal):
        trav = sum(1.0 - values[r][c] for r, c in cells) / len(cells)
        dis = 1.0 - (robot_to_goal - closest) / horizon
        dis = min(1.0, max(0.0, dis))
        scores.append(trav + lam * dis)
    return scores
