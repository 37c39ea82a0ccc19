"""Joint distributions over observed outcomes."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ModelError

CLAMP_TOL = 1e-12
SUM_TOL = 1e-9


@dataclass(frozen=True)
class Distribution:
    """Dense probability table; axis ``i`` ranges over ``variables[i]``'s outcomes."""

    variables: tuple[tuple[str, tuple[Hashable, ...]], ...]
    table: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        vars_ = tuple((str(v), tuple(o)) for v, o in self.variables)
        t = np.array(self.table, dtype=float, copy=True)
        shape = tuple(len(o) for _, o in vars_)
        if t.shape != shape:
            t = t.reshape(shape)
        if t.size and t.min() < -CLAMP_TOL:
            raise ModelError(f"probability {t.min():.3g} is below -{CLAMP_TOL}")
        t[t < 0] = 0.0
        total = float(t.sum())
        if abs(total - 1) > SUM_TOL:
            raise ModelError(f"probabilities sum to {total:.12g}, expected 1")
        t.setflags(write=False)
        object.__setattr__(self, "variables", vars_)
        object.__setattr__(self, "table", t)

    @classmethod
    def normalized(cls, variables, weights: np.ndarray) -> "Distribution":
        w = np.asarray(weights, dtype=float)
        return cls(tuple(variables), w / w.sum())

    @property
    def names(self) -> list[str]:
        return [v for v, _ in self.variables]

    def outcomes(self, var: str) -> tuple:
        return self.variables[self.axis(var)][1]

    def axis(self, var: str) -> int:
        for i, (v, _) in enumerate(self.variables):
            if v == var:
                return i
        raise KeyError(f"unknown variable {var!r}")

    def prob(self, assignment: Mapping[str, Hashable]) -> float:
        """Probability of a (possibly partial) assignment."""
        idx = []
        for v, outs in self.variables:
            if v in assignment:
                try:
                    idx.append(outs.index(assignment[v]))
                except ValueError:
                    raise KeyError(f"{assignment[v]!r} is not an outcome of {v!r}") from None
            else:
                idx.append(slice(None))
        for v in assignment:
            self.axis(v)
        return float(np.sum(self.table[tuple(idx)]))

    def marginal(self, vars_: Sequence[str]) -> "Distribution":
        axes = [self.axis(v) for v in vars_]
        drop = tuple(i for i in range(len(self.variables)) if i not in axes)
        t = self.table.sum(axis=drop) if drop else self.table
        kept = [i for i in range(len(self.variables)) if i in axes]
        t = np.transpose(t, [kept.index(a) for a in axes]) if axes else t
        return Distribution(tuple(self.variables[a] for a in axes), t)

    def items(self) -> Iterable[tuple[tuple, float]]:
        for idx in product(*(range(len(o)) for _, o in self.variables)):
            yield tuple(self.variables[i][1][k] for i, k in enumerate(idx)), float(self.table[idx])

    def max_abs_diff(self, other: "Distribution") -> float:
        if self.variables != other.variables:
            other = other.marginal(self.names)
            if self.variables != other.variables:
                raise ValueError("distributions are over different variables")
        return float(np.abs(self.table - other.table).max(initial=0.0))
