"""Finitely supported linear combinations of point evaluations ("molecules").

A molecule mu = sum_x a_x * delta(x) is stored as a sparse map from point
index to nonzero coefficient. The evaluation at the base point is the zero
functional, so base coefficients are dropped on construction and coefficients
at or below the pruning threshold are removed, giving a canonical form on
which equality is plain dict equality.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

from .config import DEFAULT_TOLERANCES
from .spaces import FiniteMetricSpace

__all__ = [
    "SpaceMismatchError",
    "Molecule",
    "Decomposition",
    "delta",
    "elementary",
    "pair",
    "realize",
    "parse_molecule",
    "load_molecule",
    "molecule_to_dict",
    "decomposition_to_dict",
    "parse_decomposition",
]

COEFF_PRUNE = DEFAULT_TOLERANCES.coeff_prune


class SpaceMismatchError(ValueError):
    """Operands live over different spaces (identity is checked, not values)."""


def _check_same_space(a: "Molecule | Decomposition", b: "Molecule | Decomposition"):
    if a.space is not b.space:
        raise SpaceMismatchError("operands belong to different spaces")


class Molecule:
    """Immutable sparse element of the span of point evaluations.

    Zero and base-point coefficients never appear in the stored map, so two
    molecules are equal exactly when their coefficient maps are equal (and
    they share the same space object).
    """

    __slots__ = ("space", "_coeffs")

    def __init__(self, space: FiniteMetricSpace, coeffs: Mapping[int, float] | None = None):
        cleaned: dict[int, float] = {}
        for x, c in (coeffs or {}).items():
            x = int(x)
            if not 0 <= x < space.n:
                raise ValueError(f"point index {x} out of range")
            c = float(c)
            if x == space.base or abs(c) <= COEFF_PRUNE:
                continue
            cleaned[x] = c
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "_coeffs", cleaned)

    def __setattr__(self, name, value):
        raise AttributeError("Molecule is immutable")

    @classmethod
    def zero(cls, space: FiniteMetricSpace) -> "Molecule":
        return cls(space, {})

    @classmethod
    def from_pairs(cls, space: FiniteMetricSpace, pairs: Iterable[tuple[int, float]]) -> "Molecule":
        """Accumulate possibly repeated (index, coefficient) entries."""
        acc: dict[int, float] = {}
        for x, c in pairs:
            acc[int(x)] = acc.get(int(x), 0.0) + float(c)
        return cls(space, acc)

    @property
    def coeffs(self) -> dict[int, float]:
        return dict(self._coeffs)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(self._coeffs))

    @property
    def is_zero(self) -> bool:
        return not self._coeffs

    def max_abs(self) -> float:
        return max((abs(c) for c in self._coeffs.values()), default=0.0)

    def __getitem__(self, x: int) -> float:
        return self._coeffs.get(int(x), 0.0)

    def items(self) -> Iterator[tuple[int, float]]:
        return iter(sorted(self._coeffs.items()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Molecule):
            return NotImplemented
        return self.space is other.space and self._coeffs == other._coeffs

    def __add__(self, other: "Molecule") -> "Molecule":
        _check_same_space(self, other)
        acc = dict(self._coeffs)
        for x, c in other._coeffs.items():
            acc[x] = acc.get(x, 0.0) + c
        return Molecule(self.space, acc)

    def __sub__(self, other: "Molecule") -> "Molecule":
        return self + (-other)

    def __neg__(self) -> "Molecule":
        return Molecule(self.space, {x: -c for x, c in self._coeffs.items()})

    def __mul__(self, scalar: float) -> "Molecule":
        return Molecule(self.space, {x: scalar * c for x, c in self._coeffs.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "Molecule":
        return self * (1.0 / scalar)

    def __repr__(self) -> str:
        body = ", ".join(f"{self.space.labels[x]}: {c:g}" for x, c in self.items())
        return f"Molecule({{{body}}})"


def delta(space: FiniteMetricSpace, x: int) -> Molecule:
    """The evaluation at point x (the zero molecule when x is the base)."""
    return Molecule(space, {x: 1.0})


def elementary(space: FiniteMetricSpace, x: int, y: int) -> Molecule:
    """(delta(x) - delta(y)) / d(x,y), the normalized dipole of a point pair."""
    if x == y:
        raise ValueError("elementary molecule needs two distinct points")
    inv = 1.0 / space.d(x, y)
    return Molecule(space, {x: inv, y: -inv})


def pair(mu: Molecule, f) -> float:
    """Evaluate mu against a function vector f with f[base] = 0."""
    f = np.asarray(f, dtype=float)
    if f.shape != (mu.space.n,):
        raise ValueError(f"expected vector of length {mu.space.n}, got shape {f.shape}")
    if f[mu.space.base] != 0.0:
        raise ValueError("function must vanish at the base point")
    return float(sum(c * f[x] for x, c in mu.items()))


@dataclass(frozen=True)
class Decomposition:
    """Weighted list of ordered point pairs realizing a molecule.

    Each term (x, y, a) stands for a * (delta(x) - delta(y)) / d(x,y); the
    two points of a term must differ.
    """

    space: FiniteMetricSpace
    terms: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        norm_terms = []
        for x, y, a in self.terms:
            x, y, a = int(x), int(y), float(a)
            if x == y:
                raise ValueError(f"decomposition term with equal endpoints {x}")
            norm_terms.append((x, y, a))
        object.__setattr__(self, "terms", tuple(norm_terms))

    def __len__(self) -> int:
        return len(self.terms)

    @classmethod
    def empty(cls, space: FiniteMetricSpace) -> "Decomposition":
        return cls(space, ())


def realize(decomp: Decomposition) -> Molecule:
    """Sum the weighted elementary molecules of a decomposition."""
    acc: dict[int, float] = {}
    for x, y, a in decomp.terms:
        w = a / decomp.space.d(x, y)
        acc[x] = acc.get(x, 0.0) + w
        acc[y] = acc.get(y, 0.0) - w
    return Molecule(decomp.space, acc)


# ----------------------------------------------------------------- JSON I/O
def parse_molecule(space: FiniteMetricSpace, obj: dict) -> Molecule:
    """Build a molecule from {"coeffs": {label: value}} against a space.

    A key naming the base point is accepted and dropped with a warning.
    """
    try:
        raw = obj["coeffs"]
        items = list(raw.items())
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValueError("molecule JSON must contain a 'coeffs' object") from exc
    coeffs: dict[int, float] = {}
    for label, value in items:
        idx = space.index(label)
        if idx == space.base:
            warnings.warn(
                f"dropping coefficient at base point {label!r}", stacklevel=2
            )
            continue
        coeffs[idx] = coeffs.get(idx, 0.0) + float(value)
    return Molecule(space, coeffs)


def load_molecule(space: FiniteMetricSpace, path) -> Molecule:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_molecule(space, json.load(fh))


def molecule_to_dict(mu: Molecule) -> dict:
    return {"coeffs": {mu.space.labels[x]: c for x, c in mu.items()}}


def decomposition_to_dict(decomp: Decomposition) -> dict:
    labels = decomp.space.labels
    return {
        "terms": [{"x": labels[x], "y": labels[y], "a": a} for x, y, a in decomp.terms]
    }


def parse_decomposition(space: FiniteMetricSpace, obj: dict) -> Decomposition:
    terms = tuple(
        (space.index(t["x"]), space.index(t["y"]), float(t["a"]))
        for t in obj["terms"]
    )
    return Decomposition(space, terms)
