"""Pure-Python search kernels; behavioural twin of the compiled module.

Both implementations must stay operation-for-operation identical
(including float accumulation order) so results are bit-reproducible
whichever backend gets imported.
"""

import math


def enumerate_feasible(times, ici_min, ici_max, consistency_max, min_size, max_size):
    """Every index subset whose consecutive gaps and gap ratios are admissible.

    ``times`` must be sorted ascending. A subset qualifies when each
    consecutive gap g satisfies ici_min < g < ici_max (strict) and each
    consecutive gap pair satisfies |ln(g2/g1)| < consistency_max
    (strict), with size in [min_size, max_size]. Enumeration is
    depth-first in index order; any prefix violating a constraint is
    pruned, and since times are sorted the scan over extensions stops as
    soon as a gap exceeds its upper bound.
    """
    n = len(times)
    out = []
    if n == 0 or min_size > n:
        return out
    ratio_hi = math.exp(consistency_max)
    ratio_lo = math.exp(-consistency_max)
    stack = []

    def extend(last, prev_gap, depth):
        if depth >= max_size:
            return
        t_last = times[last]
        for j in range(last + 1, n):
            gap = times[j] - t_last
            if gap <= ici_min:
                continue
            if gap >= ici_max:
                break
            if prev_gap > 0.0:
                if gap >= prev_gap * ratio_hi:
                    break
                if gap <= prev_gap * ratio_lo:
                    continue
            stack.append(j)
            if depth + 1 >= min_size:
                out.append(tuple(stack))
            extend(j, gap, depth + 1)
            stack.pop()

    for i in range(n):
        stack.append(i)
        extend(i, 0.0, 1)
        stack.pop()
    return out


def solve_disjoint(masks, costs):
    """Minimize 1/K + sum(costs) over non-empty disjoint candidate selections.

    Candidates must be pre-sorted by ascending cost (ties already
    canonically ordered by the caller). Branch and bound: selections are
    explored depth-first in index order, and since every candidate cost
    is non-negative, a partial cost sum that already reaches the best
    utility closes the whole remaining scan at that level.

    Returns (selected candidate indices, utility); ((), inf) when there
    are no candidates.
    """
    n = len(masks)
    best_u = math.inf
    best_sel = ()
    sel = []

    def descend(start, used, total):
        nonlocal best_u, best_sel
        k = len(sel)
        if k:
            u = 1.0 / k + total
            if u < best_u:
                best_u = u
                best_sel = tuple(sel)
        for idx in range(start, n):
            if masks[idx] & used:
                continue
            extended = total + costs[idx]
            if extended >= best_u:
                break
            sel.append(idx)
            descend(idx + 1, used | masks[idx], extended)
            sel.pop()

    descend(0, 0, 0.0)
    return best_sel, best_u
