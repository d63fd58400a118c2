"""Visit-order construction for lighting plans.

Two sequencers: the predictable SPPA order (boundary climb plus a
boustrophedon sweep) and a TSP local search (nearest neighbor improved
by 2-opt and Or-opt over nearest-neighbor candidate lists). A brute
force solver is included as an exact oracle for small instances.
"""

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, InvalidRegionError


@dataclass
class Sequence:
    """Closed visit order starting and ending at the initial position."""

    positions: list
    labels: list
    length_m: float = field(default=None)

    def __post_init__(self):
        self.positions = [np.asarray(p, dtype=float) for p in self.positions]
        if self.length_m is None:
            self.length_m = tour_length(self.positions)

    def to_json(self):
        return json.dumps(
            {
                "positions": [list(p) for p in self.positions],
                "labels": self.labels,
                "length_m": self.length_m,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        labels = [tuple(l) if isinstance(l, list) else l for l in d["labels"]]
        return cls(
            positions=[np.asarray(p, dtype=float) for p in d["positions"]],
            labels=labels,
            length_m=d["length_m"],
        )

    def to_csv(self):
        lines = ["index,x,y,z"]
        for i, p in enumerate(self.positions):
            lines.append("%d,%.9f,%.9f,%.9f" % (i, p[0], p[1], p[2]))
        return "\n".join(lines) + "\n"


def tour_length(positions):
    pts = np.asarray(positions)
    if len(pts) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def _grid_from_plan(plan):
    """Split the plan's flat position list back into rows."""
    grid = []
    k = 0
    for _, samples in plan.rows:
        grid.append([plan.positions[k + i] for i in range(len(samples))])
        k += len(samples)
    return grid


def boundary_pair_candidates(grid, initial):
    """All (upper_row, lower_row, side, cost) choices allowed by the
    closest-boundary-pair rule.

    Rows with a single sample have no boundary columns and are skipped;
    pairs are formed between rows adjacent in the remaining order. Side
    0 is the first column, side 1 the last.
    """
    eligible = [r for r, row in enumerate(grid) if len(row) >= 2]
    cands = []
    for a, b in zip(eligible, eligible[1:]):
        for side in (0, 1):
            ca = grid[a][0 if side == 0 else -1]
            cb = grid[b][0 if side == 0 else -1]
            cost = float(
                np.linalg.norm(ca - initial) + np.linalg.norm(cb - initial)
            )
            cands.append((a, b, side, cost))
    return cands


def _choose_boundary_pair(grid, initial):
    cands = boundary_pair_candidates(grid, initial)
    if not cands:
        return None
    # ties: lowest row index first, then the left boundary
    return min(cands, key=lambda c: (c[3], c[0], c[2]))


def sppa_sequence(plan, traversal="zigzag"):
    """Predictable visit order for an SPPA grid.

    Starts at the boundary pair closest to the initial position, climbs
    that boundary to the top, sweeps the grid downward boustrophedon
    style (skipping the climb boundary), finishes along the bottom and
    climbs back up to the pair's lower member.
    """
    if plan.kind != "sppa":
        raise ConfigError("sppa_sequence needs an SPPA plan")
    if traversal not in ("zigzag", "double_pass"):
        raise ConfigError("unknown traversal mode %r" % traversal)
    grid = _grid_from_plan(plan)
    if any(len(row) == 0 for row in grid):
        raise InvalidRegionError("SPPA plan contains an empty row")
    initial = plan.initial

    # "higher"/"lower" refer to world z of the generated rows; break exact
    # z ties by row index so the ordering is a strict total order
    row_z = [float(np.mean([p[2] for p in row])) for row in grid]
    by_z_desc = sorted(range(len(grid)), key=lambda r: (-row_z[r], r))
    rank = {r: i for i, r in enumerate(by_z_desc)}

    chosen = _choose_boundary_pair(grid, initial)
    if chosen is None:
        return _fallback_sweep(plan, grid, by_z_desc)
    ra, rb, side, _ = chosen
    r_s, r_e = (ra, rb) if rank[ra] < rank[rb] else (rb, ra)

    def bcol(r):
        return 0 if side == 0 else len(grid[r]) - 1

    # climb the boundary from P_s upward to the top row
    above = [r for r in by_z_desc if rank[r] < rank[r_s] and len(grid[r]) >= 2]
    labels = [(r_s, bcol(r_s))] + [
        (r, bcol(r)) for r in sorted(above, key=lambda r: -rank[r])
    ]

    # boustrophedon sweep top -> bottom, omitting the climb boundary column
    special_pair = None
    if len(grid) % 2 == 1:
        special_pair = _min_consecutive_pair(grid)

    sweep_rows = list(by_z_desc)
    side_now = side
    i = 0
    while i < len(sweep_rows):
        r = sweep_rows[i]
        merged = None
        if special_pair is not None and r in special_pair:
            other = special_pair[0] if r == special_pair[1] else special_pair[1]
            if i + 1 < len(sweep_rows) and sweep_rows[i + 1] == other:
                merged = (r, other)
        if merged is None:
            entries = _row_sweep_entries(grid, r, side, side_now)
            labels.extend(entries)
            if len(grid[r]) >= 2:
                side_now = 1 - side_now
            i += 1
        else:
            entries = _paired_sweep_entries(
                grid, merged, side, side_now, traversal
            )
            labels.extend(entries)
            side_now = 1 - side_now
            i += 2

    # climb back up the boundary from the bottom to P_e inclusive
    below = [r for r in by_z_desc if rank[r] >= rank[r_e] and len(grid[r]) >= 2]
    for r in sorted(below, key=lambda r: rank[r], reverse=True):
        labels.append((r, bcol(r)))

    positions = [initial] + [grid[r][c] for r, c in labels] + [initial]
    labels = ["initial"] + [tuple(l) for l in labels] + ["initial"]
    seq = Sequence(positions, labels)
    _check_permutation(seq, plan)
    return seq


def _row_sweep_entries(grid, r, boundary_side, side_now):
    """Columns of one row in sweep order, minus the climb boundary column."""
    cols = list(range(len(grid[r])))
    if len(cols) >= 2:
        cols = cols[1:] if boundary_side == 0 else cols[:-1]
    if side_now == 1:
        cols = cols[::-1]
    return [(r, c) for c in cols]


def _paired_sweep_entries(grid, pair, boundary_side, side_now, traversal):
    """Sweep entries for the special row pair of an odd-row grid."""
    upper, lower = pair
    ups = _row_sweep_entries(grid, upper, boundary_side, side_now)
    downs = _row_sweep_entries(grid, lower, boundary_side, side_now)
    if traversal == "double_pass":
        return ups + downs
    # zigzag: take both rows ordered by horizontal progress, hopping
    # up and down between them as the columns interleave
    def key(entry):
        r, c = entry
        frac = c / max(1, len(grid[r]) - 1)
        return frac if side_now == 0 else 1.0 - frac

    return sorted(ups + downs, key=key)


def _min_consecutive_pair(grid):
    """Consecutive row pair with the minimum total sample count."""
    best = None
    for r in range(len(grid) - 1):
        total = len(grid[r]) + len(grid[r + 1])
        if best is None or total < best[0]:
            best = (total, r)
    if best is None:
        return None
    r = best[1]
    return (r, r + 1)


def _fallback_sweep(plan, grid, by_z_desc):
    """Plain boustrophedon for grids without distinct boundary columns."""
    initial = plan.initial
    top = by_z_desc[0]
    d_first = np.linalg.norm(grid[top][0] - initial)
    d_last = np.linalg.norm(grid[top][-1] - initial)
    side_now = 0 if d_first <= d_last else 1
    labels = []
    for r in by_z_desc:
        cols = list(range(len(grid[r])))
        if side_now == 1:
            cols = cols[::-1]
        labels.extend((r, c) for c in cols)
        if len(cols) >= 2:
            side_now = 1 - side_now
    positions = [initial] + [grid[r][c] for r, c in labels] + [initial]
    labels = ["initial"] + labels + ["initial"]
    seq = Sequence(positions, labels)
    _check_permutation(seq, plan)
    return seq


def _check_permutation(seq, plan):
    want = len(plan.positions) + 2
    if len(seq.positions) != want:
        raise ConfigError(
            "sequence visits %d entries, expected %d"
            % (len(seq.positions), want)
        )


# ---------------------------------------------------------------------------
# ETSP local search


def etsp_tour(points, seed=0, restarts=4, neighbors=10):
    """Closed tour over the points, starting and ending at the first one.

    Nearest-neighbor construction followed by 2-opt and Or-opt passes
    restricted to nearest-neighbor candidate lists, repeated from a few
    construction variants; deterministic for a fixed seed.
    """
    pts = np.asarray([np.asarray(p, dtype=float) for p in points])
    n = len(pts)
    if n < 2:
        raise ConfigError("a tour needs at least two points")
    if n == 2:
        return _tour_to_sequence(pts, np.array([0, 1]))

    # large instances get smaller candidate lists, fewer restarts and a
    # scan cap to keep per-call time bounded
    max_scans = 10000
    if n > 400:
        neighbors = min(neighbors, 5)
        restarts = 1
        max_scans = 25
    elif n > 150:
        neighbors = min(neighbors, 6)
        restarts = 1
        max_scans = 40
    elif n > 60:
        restarts = min(restarts, 2)
        max_scans = 100

    k = min(neighbors, n - 1)
    tree = cKDTree(pts)
    _, knn = tree.query(pts, k=k + 1)
    knn = knn[:, 1:]  # drop self

    best_order = None
    best_len = np.inf
    for r in range(restarts):
        order = _nearest_neighbor_order(pts, first_choice=r)
        order = _local_search(pts, order, knn, max_scans=max_scans)
        length = _order_length(pts, order)
        if length < best_len - 1e-12:
            best_len = length
            best_order = order
    return _tour_to_sequence(pts, best_order)


def _nearest_neighbor_order(pts, first_choice=0):
    """Greedy construction from point 0; restarts vary the first hop."""
    n = len(pts)
    unvisited = np.ones(n, dtype=bool)
    unvisited[0] = False
    order = [0]
    cur = 0
    step = 0
    while unvisited.any():
        d = np.linalg.norm(pts[unvisited] - pts[cur], axis=1)
        idxs = np.flatnonzero(unvisited)
        if step == 0:
            ranked = idxs[np.argsort(d, kind="stable")]
            pick = ranked[min(first_choice, len(ranked) - 1)]
        else:
            pick = idxs[np.argmin(d)]
        order.append(int(pick))
        unvisited[pick] = False
        cur = int(pick)
        step += 1
    return np.array(order)


def _order_length(pts, order):
    closed = pts[np.append(order, order[0])]
    return float(np.linalg.norm(np.diff(closed, axis=0), axis=1).sum())


def _local_search(pts, order, knn, max_scans=10000):
    order = order.copy()
    for _ in range(max_scans):
        improved = _two_opt_scan(pts, order, knn) > 0
        if not improved:
            improved = _or_opt_scan(pts, order, knn) > 0
        if not improved:
            break
    return order


def _succ(order):
    return np.roll(order, -1)


def _two_opt_scan(pts, order, knn):
    """One vectorized 2-opt scan; applies a batch of disjoint moves.

    Gains are evaluated for replacing edges (a, succ a) and (c, succ c)
    by (a, c) and (succ a, succ c) over the candidate lists; the best
    non-conflicting moves (no shared endpoint city) are applied in gain
    order. Returns the number of moves applied.
    """
    n = len(order)
    pos = np.empty(n, dtype=int)
    pos[order] = np.arange(n)
    a = order
    b = _succ(order)
    d_ab = np.linalg.norm(pts[a] - pts[b], axis=1)

    c = knn[a]  # (n, k) candidate cities for the new a-c edge
    dpos = pos[c]
    d_next = order[(dpos + 1) % n]
    d_cd = np.linalg.norm(pts[c] - pts[d_next], axis=2)
    gain = (
        d_ab[:, None]
        + d_cd
        - np.linalg.norm(pts[a][:, None, :] - pts[c], axis=2)
        - np.linalg.norm(pts[b][:, None, :] - pts[d_next], axis=2)
    )
    # degenerate picks: shared or adjacent edges
    bad = (c == b[:, None]) | (c == a[:, None]) | (d_next == a[:, None])
    gain[bad] = -np.inf

    ii, jj = np.nonzero(gain > 1e-10)
    if len(ii) == 0:
        return 0
    ranked = np.argsort(-gain[ii, jj], kind="stable")
    used = np.zeros(n, dtype=bool)
    applied = 0
    for t in ranked:
        ea, eb = int(a[ii[t]]), int(b[ii[t]])
        ec, ed = int(c[ii[t], jj[t]]), int(d_next[ii[t], jj[t]])
        if used[ea] or used[eb] or used[ec] or used[ed]:
            continue
        pos[order] = np.arange(n)
        # earlier reversals may have flipped local direction; the move is
        # valid as removing edges {ea,eb} and {ec,ed}
        if order[(pos[ea] + 1) % n] == eb and order[(pos[ec] + 1) % n] == ed:
            px, py = int(pos[ea]), int(pos[ec])
        elif order[(pos[eb] + 1) % n] == ea and order[(pos[ed] + 1) % n] == ec:
            px, py = int(pos[eb]), int(pos[ed])
        else:
            continue
        lo, hi = (px + 1, py) if px < py else (py + 1, px)
        order[lo : hi + 1] = order[lo : hi + 1][::-1]
        used[ea] = used[eb] = used[ec] = used[ed] = True
        applied += 1
    return applied


def _or_opt_scan(pts, order, knn):
    """One vectorized Or-opt scan; relocates disjoint 1-3 point segments.

    Candidate moves cut a short segment out of the tour and reinsert it
    after a nearby city; the best non-conflicting moves are applied in
    gain order. Returns the number of moves applied.
    """
    n = len(order)
    pos = np.empty(n, dtype=int)
    pos[order] = np.arange(n)
    moves = []
    for seg_len in (1, 2, 3):
        if n < seg_len + 3:
            continue
        i = np.arange(n)
        s0 = order[i]
        s1 = order[(i + seg_len - 1) % n]
        prev = order[(i - 1) % n]
        nxt = order[(i + seg_len) % n]
        remove = (
            np.linalg.norm(pts[prev] - pts[s0], axis=1)
            + np.linalg.norm(pts[s1] - pts[nxt], axis=1)
            - np.linalg.norm(pts[prev] - pts[nxt], axis=1)
        )
        c = knn[s0]
        cpos = pos[c]
        cd = order[(cpos + 1) % n]
        ins = (
            np.linalg.norm(pts[c] - pts[s0][:, None, :], axis=2)
            + np.linalg.norm(pts[cd] - pts[s1][:, None, :], axis=2)
            - np.linalg.norm(pts[c] - pts[cd], axis=2)
        )
        gain = remove[:, None] - ins
        # candidates inside or adjacent to the segment are invalid
        seg_pos = (i[:, None] + np.arange(seg_len)[None, :]) % n
        inside = np.zeros((n, knn.shape[1]), dtype=bool)
        for t in range(seg_len):
            inside |= cpos == seg_pos[:, t][:, None]
        inside |= cpos == (i - 1)[:, None] % n
        gain[inside] = -np.inf
        ii, jj = np.nonzero(gain > 1e-10)
        for g, a_i, b_j in zip(gain[ii, jj], ii, jj):
            seg = [int(order[(a_i + t) % n]) for t in range(seg_len)]
            moves.append(
                (
                    float(g),
                    seg,
                    int(order[(a_i - 1) % n]),
                    int(order[(a_i + seg_len) % n]),
                    int(c[a_i, b_j]),
                    int(cd[a_i, b_j]),
                )
            )
    if not moves:
        return 0
    moves.sort(key=lambda m: -m[0])
    used = np.zeros(n, dtype=bool)
    lst = list(order)
    applied = 0
    for _, seg, prev, nxt, c_city, cd_city in moves:
        touched = seg + [prev, nxt, c_city, cd_city]
        if used[touched].any():
            continue
        p0 = lst.index(seg[0])
        # verify the adjacency the gain was computed from still holds
        if [lst[(p0 + t) % n] for t in range(len(seg))] != seg:
            continue
        if lst[(p0 - 1) % n] != prev or lst[(p0 + len(seg)) % n] != nxt:
            continue
        pc = lst.index(c_city)
        if lst[(pc + 1) % n] != cd_city:
            continue
        for city in seg:
            lst.remove(city)
        at = lst.index(c_city)
        lst[at + 1 : at + 1] = seg
        used[touched] = True
        applied += 1
    if applied:
        order[:] = np.array(lst)
    return applied


def _tour_to_sequence(pts, order):
    # rotate so the tour starts at point 0
    start = int(np.flatnonzero(order == 0)[0])
    order = np.roll(order, -start)
    positions = [pts[i] for i in order] + [pts[0]]
    labels = [int(i) for i in order] + [0]
    return Sequence(positions, labels)


def brute_force_tour(points, max_points=10):
    """Exact minimum closed tour by exhaustive permutation (n <= 10)."""
    pts = np.asarray([np.asarray(p, dtype=float) for p in points])
    n = len(pts)
    if n > max_points:
        raise ConfigError("brute force refused beyond %d points" % max_points)
    if n < 2:
        raise ConfigError("a tour needs at least two points")
    if n == 2:
        return _tour_to_sequence(pts, np.array([0, 1]))

    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    perms = np.array(list(itertools.permutations(range(1, n))))
    perms = perms[perms[:, 0] < perms[:, -1]]  # canonical direction
    orders = np.hstack([np.zeros((len(perms), 1), dtype=int), perms])
    closed = np.hstack([orders, np.zeros((len(perms), 1), dtype=int)])
    lengths = dist[closed[:, :-1], closed[:, 1:]].sum(axis=1)
    return _tour_to_sequence(pts, orders[int(np.argmin(lengths))])
