"""Polytopes over parameters and lifted auxiliary variables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    feas: float = 1e-7  # row satisfaction / vertex feasibility / dedup
    pivot: float = 1e-9  # simplex pivot and reduced-cost threshold
    equality_slack: float = 1e-12  # zero-width intervals become l-s <= f <= u+s
    obbt_margin: float = 1e-9  # outward padding of tightened bounds


TOL = Tolerances()


class EmptyRegion(Exception):
    """The uncertainty region (or a local slice of it) is empty."""


def mccormick_rows(n_vars: int, z: int, x: int, y: int, lo, hi):
    """The four envelope rows for z = x*y as (A, b) with A @ v <= b."""
    xl, xu, yl, yu = lo[x], hi[x], lo[y], hi[y]
    A = np.zeros((4, n_vars))
    b = np.empty(4)
    # z >= yl*x + xl*y - xl*yl
    A[0, x] += yl
    A[0, y] += xl
    A[0, z] -= 1
    b[0] = xl * yl
    # z <= yl*x + xu*y - xu*yl
    A[1, x] -= yl
    A[1, y] -= xu
    A[1, z] += 1
    b[1] = -xu * yl
    # z >= yu*x + xu*y - xu*yu
    A[2, x] += yu
    A[2, y] += xu
    A[2, z] -= 1
    b[2] = xu * yu
    # z <= yu*x + xl*y - xl*yu
    A[3, x] -= yu
    A[3, y] -= xl
    A[3, z] += 1
    b[3] = -xl * yu
    return A, b


class Polytope:
    """Linear system ``A x <= b`` with finite variable bounds.

    ``products`` lists bilinear relations ``(z, x, y)`` meaning z = x*y;
    their McCormick rows are regenerated from the current bounds, so the
    stored ``base`` rows never contain them.
    """

    def __init__(
        self,
        var_names,
        A,
        b,
        lo,
        hi,
        products=(),
        monomial_map=None,
        n_params=None,
        infeasible=False,
    ):
        self.var_names = list(var_names)
        n = len(self.var_names)
        self.base_A = np.asarray(A, dtype=float).reshape(-1, n)
        self.base_b = np.asarray(b, dtype=float).reshape(-1)
        self.lo = np.asarray(lo, dtype=float).copy()
        self.hi = np.asarray(hi, dtype=float).copy()
        self.products = tuple(products)
        self.monomial_map = dict(monomial_map or {})
        self.n_params = n if n_params is None else n_params
        self.infeasible = infeasible
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
            raise ValueError("variable bounds must be finite")
        self._rows = None

    @property
    def dim(self) -> int:
        return len(self.var_names)

    def _build_rows(self):
        blocks_A, blocks_b = [self.base_A], [self.base_b]
        for z, x, y in self.products:
            A, b = mccormick_rows(self.dim, z, x, y, self.lo, self.hi)
            blocks_A.append(A)
            blocks_b.append(b)
        return np.vstack(blocks_A), np.concatenate(blocks_b)

    @property
    def A(self) -> np.ndarray:
        if self._rows is None:
            self._rows = self._build_rows()
        return self._rows[0]

    @property
    def b(self) -> np.ndarray:
        if self._rows is None:
            self._rows = self._build_rows()
        return self._rows[1]

    def with_bounds(self, lo, hi, infeasible=False) -> "Polytope":
        return Polytope(
            self.var_names,
            self.base_A,
            self.base_b,
            lo,
            hi,
            self.products,
            self.monomial_map,
            self.n_params,
            infeasible,
        )

    def contains(self, x, tol: float = TOL.feas) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lo - tol) or np.any(x > self.hi + tol):
            return False
        return bool(np.all(self.A @ x <= self.b + tol))

    def max_violation(self, x) -> float:
        x = np.asarray(x, dtype=float)
        v = [0.0, float(np.max(self.lo - x)), float(np.max(x - self.hi))]
        if len(self.b):
            v.append(float(np.max(self.A @ x - self.b)))
        return max(v)

    def dump(self) -> str:
        """Plain-text listing used for debugging and golden files."""
        lines = [f"var {n} in [{l:.12g},{h:.12g}]" for n, l, h in zip(self.var_names, self.lo, self.hi)]
        for row, rhs in zip(self.A, self.b):
            lines.append("row: " + " ".join(f"{c:.12g}" for c in row) + f" <= {rhs:.12g}")
        return "\n".join(lines) + "\n"
