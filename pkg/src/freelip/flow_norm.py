"""Exact and heuristic computation of the free p-norm, 0 < p <= 1.

The norm of a molecule is the infimum of (sum_j |a_j|^p)^(1/p) over all ways
of writing it as a weighted sum of normalized dipoles. Merging terms on the
same ordered pair never increases the cost, so the infimum equals a minimum
over flows b on the complete directed graph on all points, subject to
(outflow - inflow) = a_z at every non-base point with the base free, at cost
sum_e d(e)^p |b_e|^p. Because t -> t^p is concave, a minimizer lives on a
cycle-free (forest) support; intermediate "hub" points outside the support of
the molecule can strictly lower the cost when p < 1, so the search always
runs over all points, not just the support.

Two solvers:

* ``forest-exact``: dynamic programming over vertex subsets that computes
  the exact minimum over all forests. A rooted tree on {v} + S is either v
  with a single child subtree (paying d(v,u)^p |a(S)|^p for the connecting
  edge, since a tree edge must carry the total divergence hanging below it)
  or a merge of two subtrees at v. Components avoiding the base must have
  zero net divergence. O(3^n) time, exact for every instance it accepts.

* ``local-search``: hill climbing over spanning trees by single-edge swaps,
  from the direct-to-base star and from seeded random trees. Always an upper
  bound on the norm; used above the exact-solver range.

Flows on an explicit forest are recovered by leaf elimination (children
before parents, lexicographically smallest root), which is also how
certificates are rebuilt from the DP.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import DEFAULT_TOLERANCES, EXACTNESS_THRESHOLD, HARD_CAP, Tolerances
from .molecules import Decomposition, Molecule

__all__ = [
    "NormResult",
    "SolverRangeError",
    "cost_p",
    "p_norm",
    "local_search",
]


class SolverRangeError(RuntimeError):
    """The requested exact method cannot run at this instance size."""


@dataclass(frozen=True)
class NormResult:
    """A norm value together with the decomposition certifying it.

    ``optimal`` is True only for methods exact at the instance size; the
    certificate always realizes the query molecule and its p-cost always
    equals ``value`` (up to the configured tolerances).
    """

    value: float
    certificate: Decomposition
    method: str
    optimal: bool


def _check_p(p: float) -> None:
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")


def cost_p(decomp: Decomposition, p: float) -> float:
    """(sum_j |a_j|^p)^(1/p); zero for the empty decomposition."""
    _check_p(p)
    if not decomp.terms:
        return 0.0
    total = sum(abs(a) ** p for _, _, a in decomp.terms)
    return total ** (1.0 / p)


def p_norm(
    mu: Molecule,
    p: float,
    method: str = "auto",
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    exactness_threshold: int = EXACTNESS_THRESHOLD,
    hard_cap: int = HARD_CAP,
    seed: int = 0,
    restarts: int = 8,
) -> NormResult:
    """Free p-norm of a molecule with a certifying decomposition.

    ``auto`` picks the exact solver when the space has at most
    ``exactness_threshold`` points and local search otherwise. Requesting
    ``forest-exact`` above ``hard_cap`` points raises
    :class:`SolverRangeError` instead of silently falling back. The value is
    always an upper bound on the norm and is exact when ``optimal`` is True.
    """
    _check_p(p)
    n = mu.space.n
    if method == "auto":
        method = "forest-exact" if n <= exactness_threshold else "local-search"
    if method == "forest-exact":
        if n > hard_cap:
            raise SolverRangeError(
                f"forest-exact refused: {n} points exceeds the hard cap "
                f"{hard_cap}; use method='local-search' for an upper bound"
            )
        if mu.is_zero:
            return NormResult(0.0, Decomposition.empty(mu.space), method, True)
        value, cert = _forest_exact(mu, p, tolerances)
        return NormResult(value, cert, method, True)
    if method == "local-search":
        return local_search(mu, p, seed=seed, restarts=restarts, tolerances=tolerances)
    raise ValueError(f"unknown method {method!r}")


# ------------------------------------------------------------ subset DP core
@lru_cache(maxsize=32)
def _masks_by_popcount(m: int) -> tuple[tuple[int, ...], ...]:
    by_size: list[list[int]] = [[] for _ in range(m + 1)]
    for S in range(1 << m):
        by_size[bin(S).count("1")].append(S)
    return tuple(tuple(level) for level in by_size)


class _DPState:
    """Finished DP tables plus everything needed to rebuild a certificate."""

    __slots__ = ("n", "snap", "asum", "gabs", "wp", "C", "T_free", "P", "full")

    def __init__(self, mu: Molecule, p: float, snap: float):
        space = mu.space
        n = space.n
        m = n - 1  # bit i of a mask stands for point i + 1
        nmask = 1 << m
        avec = np.zeros(max(m, 1))
        for z, c in mu.items():
            avec[z - 1] = c
        asum = np.zeros(nmask)
        for S in range(1, nmask):
            low = (S & -S).bit_length() - 1
            asum[S] = asum[S & (S - 1)] + avec[low]
        gabs = np.where(np.abs(asum) <= snap, 0.0, np.abs(asum) ** p)
        wp = space.dist**p

        INF = np.inf
        C = np.full((n, nmask), INF)
        C[:, 0] = 0.0
        levels = _masks_by_popcount(m)
        for k in range(1, m + 1):
            for S in levels[k]:
                g = gabs[S]
                best = np.full(n, INF)
                # v gains a single child u whose subtree spans S
                T = S
                while T:
                    ub = T & -T
                    u = ub.bit_length()  # node index = bit position + 1
                    np.minimum(best, C[u, S ^ ub] + wp[:, u] * g, out=best)
                    T ^= ub
                # v merges two child forests; split S once per unordered pair
                low = S & -S
                sub = (S - 1) & S
                while sub:
                    if sub & low:
                        np.minimum(best, C[:, sub] + C[:, S ^ sub], out=best)
                    sub = (sub - 1) & S
                C[:, S] = best

        # cheapest tree spanning exactly S that avoids the base; feasible
        # only when the divergences over S cancel
        T_free = np.full(nmask, INF)
        T_free[0] = 0.0
        for S in range(1, nmask):
            if abs(asum[S]) <= snap:
                rb = S & -S
                T_free[S] = C[rb.bit_length(), S ^ rb]
        # cheapest partition of U into feasible base-free components
        P = np.full(nmask, INF)
        P[0] = 0.0
        for U in range(1, nmask):
            low = U & -U
            best_p = INF
            G = U
            while G:
                if G & low and T_free[G] < INF:
                    cand = T_free[G] + P[U ^ G]
                    if cand < best_p:
                        best_p = cand
                G = (G - 1) & U
            P[U] = best_p

        self.n = n
        self.snap = snap
        self.asum = asum
        self.gabs = gabs
        self.wp = wp
        self.C = C
        self.T_free = T_free
        self.P = P
        self.full = nmask - 1

    def minimum(self) -> tuple[float, int]:
        """(min cost^p, base component mask), scanning masks ascending."""
        best = np.inf
        best_S0 = 0
        for S0 in range(self.full + 1):
            cand = self.C[0, S0] + self.P[self.full ^ S0]
            if cand < best:
                best = cand
                best_S0 = S0
        return float(best), best_S0

    # -- certificate reconstruction (replays the argmin scans above) --------
    def _flow(self, S: int) -> float:
        a = self.asum[S]
        return 0.0 if abs(a) <= self.snap else float(a)

    def rebuild_tree(self, v: int, S: int) -> list[tuple[int, int, float]]:
        """Edges (child, parent, flow toward parent) of an optimal tree."""
        if S == 0:
            return []
        target = self.C[v, S]
        g = self.gabs[S]
        T = S
        while T:
            ub = T & -T
            u = ub.bit_length()
            if self.C[u, S ^ ub] + self.wp[v, u] * g == target:
                return [(u, v, self._flow(S))] + self.rebuild_tree(u, S ^ ub)
            T ^= ub
        low = S & -S
        sub = (S - 1) & S
        while sub:
            if sub & low and self.C[v, sub] + self.C[v, S ^ sub] == target:
                return self.rebuild_tree(v, sub) + self.rebuild_tree(v, S ^ sub)
            sub = (sub - 1) & S
        raise AssertionError("DP table inconsistent during certificate rebuild")

    def rebuild_partition(self, U: int) -> list[int]:
        """Base-free component masks of an optimal partition of U."""
        groups = []
        while U:
            low = U & -U
            target = self.P[U]
            G = U
            while G:
                if (
                    G & low
                    and self.T_free[G] < np.inf
                    and self.T_free[G] + self.P[U ^ G] == target
                ):
                    groups.append(G)
                    U ^= G
                    break
                G = (G - 1) & U
            else:
                raise AssertionError("DP table inconsistent during partition rebuild")
        return groups


def _forest_exact(mu: Molecule, p: float, tol: Tolerances) -> tuple[float, Decomposition]:
    state = _DPState(mu, p, tol.flow_feasibility)
    best, S0 = state.minimum()
    edges = state.rebuild_tree(0, S0)
    for G in state.rebuild_partition(state.full ^ S0):
        rb = G & -G
        r = rb.bit_length()
        edges += state.rebuild_tree(r, G ^ rb)
    cert = _certificate_from_edges(mu.space, edges, tol.flow_feasibility)
    value = best ** (1.0 / p) if best > 0.0 else 0.0
    return value, cert


def _certificate_from_edges(space, edges, snap) -> Decomposition:
    """Oriented flow edges -> decomposition terms with positive weights."""
    terms = []
    for u, v, flow in edges:
        if abs(flow) <= snap:
            continue
        if flow > 0:
            terms.append((u, v, flow * space.d(u, v)))
        else:
            terms.append((v, u, -flow * space.d(u, v)))
    terms.sort(key=lambda t: (t[0], t[1]))
    return Decomposition(space, tuple(terms))


# ------------------------------------------------------- explicit forest flows
def _forest_flows(space, coeffs, edges, snap):
    """Unique flow on an explicit forest by leaf elimination.

    Returns a list of oriented (child, parent, flow) triples, or None when a
    component that misses the base has nonzero net divergence. Components are
    rooted at the base when they contain it, else at their smallest point;
    children are processed before parents.
    """
    n = space.n
    adj: dict[int, list[int]] = {v: [] for v in range(n)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * n
    out: list[tuple[int, int, float]] = []
    for start in range(n):
        if seen[start]:
            continue
        comp = [start]
        seen[start] = True
        i = 0
        while i < len(comp):
            for w in adj[comp[i]]:
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
            i += 1
        if len(comp) == 1:
            if start != space.base and abs(coeffs.get(start, 0.0)) > snap:
                return None
            continue
        root = space.base if space.base in comp else min(comp)
        parent = {root: -1}
        order = [root]
        i = 0
        while i < len(order):
            u = order[i]
            for w in sorted(adj[u]):
                if w not in parent:
                    parent[w] = u
                    order.append(w)
            i += 1
        subtotal = {
            v: (0.0 if v == space.base else coeffs.get(v, 0.0)) for v in comp
        }
        for u in reversed(order[1:]):
            f = subtotal[u]
            out.append((u, parent[u], 0.0 if abs(f) <= snap else f))
            subtotal[parent[u]] += f
        if root != space.base and abs(subtotal[root]) > snap:
            return None
    return out


def _flow_cost_pow(space, flows, p):
    wp = space.dist
    return sum(wp[u, v] ** p * abs(f) ** p for u, v, f in flows if f != 0.0)


# ------------------------------------------------------------- local search
def _prufer_tree(rng, n) -> list[tuple[int, int]]:
    """Uniform random labelled spanning tree on n nodes."""
    if n == 2:
        return [(0, 1)]
    seq = [int(x) for x in rng.integers(0, n, size=n - 2)]
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((min(leaf, v), max(leaf, v)))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u, v = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((min(u, v), max(u, v)))
    return edges


def _components_after_removal(n, edges, removed):
    comp = [-1] * n
    adj: dict[int, list[int]] = {v: [] for v in range(n)}
    for e in edges:
        if e != removed:
            adj[e[0]].append(e[1])
            adj[e[1]].append(e[0])
    label = 0
    for s in range(n):
        if comp[s] != -1:
            continue
        stack = [s]
        comp[s] = label
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if comp[w] == -1:
                    comp[w] = label
                    stack.append(w)
        label += 1
    return comp


def local_search(
    mu: Molecule,
    p: float,
    seed: int = 0,
    restarts: int = 8,
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> NormResult:
    """Heuristic upper bound on the p-norm by spanning-tree hill climbing.

    Starts from the direct-to-base star and from ``restarts`` seeded random
    spanning trees; moves swap one tree edge for another edge across the cut
    it opens, accepting strict cost decreases. Deterministic for a fixed
    seed. The returned value is always >= the exact norm.
    """
    _check_p(p)
    space = mu.space
    n = space.n
    snap = tolerances.flow_feasibility
    if mu.is_zero or n < 2:
        return NormResult(0.0, Decomposition.empty(space), "local-search", False)
    coeffs = mu.coeffs

    def evaluate(edges):
        flows = _forest_flows(space, coeffs, edges, snap)
        # spanning trees contain the base, so they are always feasible
        assert flows is not None
        return _flow_cost_pow(space, flows, p), flows

    def climb(edges):
        edges = sorted(edges)
        cost, flows = evaluate(edges)
        improved = True
        while improved:
            improved = False
            for e_out in list(edges):
                comp = _components_after_removal(n, edges, e_out)
                side_a = sorted(v for v in range(n) if comp[v] == comp[e_out[0]])
                side_b = sorted(v for v in range(n) if comp[v] == comp[e_out[1]])
                for u in side_a:
                    for v in side_b:
                        e_in = (min(u, v), max(u, v))
                        if e_in == e_out:
                            continue
                        cand = sorted(e for e in edges if e != e_out) + [e_in]
                        cand_cost, cand_flows = evaluate(cand)
                        if cand_cost < cost * (1.0 - 1e-12) - 1e-300:
                            edges, cost, flows = sorted(cand), cand_cost, cand_flows
                            improved = True
                            break
                    if improved:
                        break
                if improved:
                    break
        return cost, flows

    star = [(0, v) for v in range(1, n)]
    best_cost, best_flows = climb(star)
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        cost, flows = climb(_prufer_tree(rng, n))
        if cost < best_cost * (1.0 - 1e-12):
            best_cost, best_flows = cost, flows

    cert = _certificate_from_edges(space, best_flows, snap)
    value = best_cost ** (1.0 / p) if best_cost > 0.0 else 0.0
    return NormResult(value, cert, "local-search", False)
