"""Finite pointed metric spaces: representation, validation, generation, JSON I/O.

A space is a finite set of labelled points with a symmetric distance matrix
and a distinguished base point. The base point is always stored at index 0;
loaders permute their input accordingly, so labels are purely cosmetic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances

__all__ = [
    "FiniteMetricSpace",
    "TriangleViolation",
    "ValidationReport",
    "validate",
    "snowflake",
    "random_space",
    "parse_space",
    "load_space",
    "space_to_dict",
    "save_space",
]

GENERATORS = ("uniform-shortest-path", "euclidean")


class FiniteMetricSpace:
    """Immutable finite pointed (p-)metric space.

    The distinguished base point sits at index 0. Pass ``base`` to the
    constructor to promote another point; labels and matrix rows are permuted
    so index 0 is always the base in storage.

    Construction checks structure only (square matrix, matching label count,
    unique labels, base in range). Metric axioms are checked by
    :func:`validate`, which reports rather than raises, so malformed
    candidate spaces can be inspected.
    """

    __slots__ = ("labels", "dist")

    def __init__(self, labels: Sequence[str], dist, base: int = 0):
        labels = tuple(str(s) for s in labels)
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate point labels")
        d = np.array(dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {d.shape}")
        if d.shape[0] != len(labels):
            raise ValueError(
                f"matrix size {d.shape[0]} does not match {len(labels)} labels"
            )
        if not 0 <= base < len(labels):
            raise ValueError(f"base index {base} out of range")
        if base != 0:
            perm = [base] + [i for i in range(len(labels)) if i != base]
            labels = tuple(labels[i] for i in perm)
            d = d[np.ix_(perm, perm)]
        d.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dist", d)

    def __setattr__(self, name, value):
        raise AttributeError("FiniteMetricSpace is immutable")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def base(self) -> int:
        return 0

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown point label {label!r}") from None

    def d(self, i: int, j: int) -> float:
        return float(self.dist[i, j])

    def __repr__(self) -> str:
        return f"FiniteMetricSpace(n={self.n}, base={self.labels[0]!r})"


class TriangleViolation(NamedTuple):
    """d(i,k) exceeds d(i,j) + d(j,k) by `slack` (in the p-th power scale
    for p-metric mode)."""

    i: int
    j: int
    k: int
    slack: float


@dataclass
class ValidationReport:
    ok: bool
    mode: str
    p: float
    data_errors: list[str] = field(default_factory=list)
    violations: list[TriangleViolation] = field(default_factory=list)


def validate(
    space: FiniteMetricSpace,
    mode: str = "metric",
    p: float = 1.0,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ValidationReport:
    """Check the metric (or p-metric) axioms exhaustively.

    Data errors (NaN, negative, asymmetric, bad diagonal, zero off-diagonal
    entries) are reported separately from triangle violations; every
    violating triple (i, j, k) with d(i,k) > d(i,j) + d(j,k) is listed with
    its slack. In ``p-metric`` mode the inequality is checked on the p-th
    powers of the distances.
    """
    if mode not in ("metric", "p-metric"):
        raise ValueError(f"unknown validation mode {mode!r}")
    if mode == "p-metric" and not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if mode == "metric":
        p = 1.0

    D = space.dist
    n = space.n
    errors: list[str] = []
    if np.isnan(D).any():
        errors.append("matrix contains NaN entries")
    if (D < 0).any():
        errors.append("matrix contains negative entries")
    bad_diag = np.flatnonzero(np.diag(D) != 0.0)
    for i in bad_diag:
        errors.append(f"nonzero diagonal entry at {space.labels[i]!r}")
    asym = np.argwhere(D != D.T)
    for i, j in asym[asym[:, 0] < asym[:, 1]]:
        errors.append(
            f"asymmetric entries at ({space.labels[i]!r}, {space.labels[j]!r})"
        )
    offdiag_zero = np.argwhere(D == 0.0)
    for i, j in offdiag_zero[offdiag_zero[:, 0] < offdiag_zero[:, 1]]:
        errors.append(
            f"zero distance between distinct points "
            f"({space.labels[i]!r}, {space.labels[j]!r})"
        )

    violations: list[TriangleViolation] = []
    if not errors:
        Dp = D if p == 1.0 else D**p
        # slack[i,j,k] = d(i,k)^p - d(i,j)^p - d(j,k)^p
        slack = Dp[:, None, :] - Dp[:, :, None] - Dp[None, :, :]
        for i, j, k in np.argwhere(slack > tolerances.triangle_slack):
            if i < k and j != i and j != k:
                violations.append(
                    TriangleViolation(int(i), int(j), int(k), float(slack[i, j, k]))
                )
    return ValidationReport(
        ok=not errors and not violations,
        mode=mode,
        p=p,
        data_errors=errors,
        violations=violations,
    )


def snowflake(space: FiniteMetricSpace, alpha: float) -> FiniteMetricSpace:
    """Raise every distance to the power ``alpha`` in (0, 1].

    Concavity of t -> t^alpha preserves the triangle inequality, so the
    result of snowflaking a metric space is again metric.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return FiniteMetricSpace(space.labels, space.dist**alpha)


def random_space(
    n: int, seed: int, generator: str = "uniform-shortest-path"
) -> FiniteMetricSpace:
    """Deterministic random metric space on ``n`` points.

    ``uniform-shortest-path`` draws i.i.d. edge weights in (0, 1] on the
    complete graph and closes them under shortest paths. ``euclidean:<dim>``
    draws points in the unit cube of the given dimension. Same (n, seed,
    generator) always reproduces the same matrix bit for bit.
    """
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    rng = np.random.default_rng(seed)
    labels = [f"x{i}" for i in range(n)]
    if generator == "uniform-shortest-path":
        w = np.zeros((n, n))
        iu = np.triu_indices(n, k=1)
        w[iu] = 1.0 - rng.random(len(iu[0]))  # weights in (0, 1]
        w = w + w.T
        d = w.copy()
        for k in range(n):  # Floyd-Warshall closure
            d = np.minimum(d, d[:, k, None] + d[None, k, :])
        np.fill_diagonal(d, 0.0)
    elif generator.startswith("euclidean"):
        _, _, dim_str = generator.partition(":")
        dim = int(dim_str) if dim_str else 2
        if dim < 1:
            raise ValueError(f"euclidean dimension must be >= 1, got {dim}")
        pts = rng.random((n, dim))
        diff = pts[:, None, :] - pts[None, :, :]
        d = np.sqrt((diff**2).sum(axis=-1))
        np.fill_diagonal(d, 0.0)
    else:
        raise ValueError(
            f"unknown generator {generator!r}; expected 'uniform-shortest-path' "
            f"or 'euclidean:<dim>'"
        )
    return FiniteMetricSpace(labels, d)


# ----------------------------------------------------------------- JSON I/O
def parse_space(obj: dict) -> FiniteMetricSpace:
    """Build a space from {"labels": [...], "base": label, "dist": [[...]]}.

    Matrix row/column order follows the labels array; the named base point is
    moved to index 0. Duplicate labels are rejected.
    """
    try:
        labels = list(obj["labels"])
        base_label = obj["base"]
        dist = obj["dist"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"space JSON missing field: {exc}") from exc
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate point labels in space file")
    if base_label not in labels:
        raise ValueError(f"base label {base_label!r} not among labels")
    return FiniteMetricSpace(labels, dist, base=labels.index(base_label))


def load_space(path) -> FiniteMetricSpace:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_space(json.load(fh))


def space_to_dict(space: FiniteMetricSpace) -> dict:
    return {
        "labels": list(space.labels),
        "base": space.labels[0],
        "dist": space.dist.tolist(),
    }


def save_space(space: FiniteMetricSpace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(space_to_dict(space), fh, indent=2)
        fh.write("\n")
