# src/numerics/grid_quadrature.py
"""
Shared age mesh, profile container and composite trapezoid quadrature.

Every integral in the model is truncated at `a_max` and evaluated with the same
trapezoid rule, so normalisations (e.g. the stable age distribution) are exact
with respect to the library's own quadrature.

The two exponential recursions below evaluate

    exponential_convolution(f, λ)(a) = ∫_0^a f(σ) e^{-λ(a-σ)} dσ
    exponential_tail(g, λ)(a)        = ∫_a^{a_max} g(x) e^{-λ(x-a)} dx

in O(n) each. The convolution is the composite trapezoid of its integral. The
tail is its exact adjoint under the trapezoid inner product, so nested integrals
can be re-ordered without changing a single digit beyond rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import integrate as sp_integrate
from scipy.signal import lfilter


@dataclass(frozen=True)
class AgeGrid:
    """Uniform discretisation of [0, a_max] with `n` nodes (Δa = a_max / (n - 1))."""

    a_max: float = 100.0
    n: int = 2001

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"AgeGrid needs at least 3 nodes, got n={self.n}")
        if not (self.a_max > 0 and np.isfinite(self.a_max)):
            raise ValueError(f"AgeGrid needs a finite a_max > 0, got {self.a_max}")

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.linspace(0.0, self.a_max, self.n)
        nodes.setflags(write=False)
        return nodes

    @property
    def step(self) -> float:
        return self.a_max / (self.n - 1)

    def profile(self, values) -> "Profile":
        return Profile(self, values)

    def constant(self, value: float) -> "Profile":
        return Profile(self, np.full(self.n, float(value)))

    def from_function(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Profile":
        return Profile(self, np.broadcast_to(fn(self.nodes), (self.n,)))

    def ages(self) -> "Profile":
        return Profile(self, self.nodes)

    def refined(self, factor: int) -> "AgeGrid":
        return AgeGrid(a_max=self.a_max, n=(self.n - 1) * factor + 1)


@dataclass(frozen=True, eq=False)
class Profile:
    """A real-valued function of age sampled on an AgeGrid. Immutable."""

    # numpy scalars on the left must defer to the reflected Profile operators
    __array_ufunc__ = None

    grid: AgeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.shape != (self.grid.n,):
            raise ValueError(
                f"Profile has {values.shape} values but the grid has {self.grid.n} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("Profile values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    # --- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Profile):
            if other.grid != self.grid:
                raise ValueError("Profiles live on different grids")
            return other.values
        return np.asarray(other, dtype=float)

    def __add__(self, other):
        return Profile(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Profile(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return Profile(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return Profile(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Profile(self.grid, self.values / self._coerce(other))

    def __neg__(self):
        return Profile(self.grid, -self.values)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Profile":
        return Profile(self.grid, fn(self.values))

    # --- inspection -------------------------------------------------------
    def __len__(self) -> int:
        return self.grid.n

    def __getitem__(self, index):
        return self.values[index]

    def at(self, age: float) -> float:
        """Linear interpolation between nodes (flat outside the grid)."""
        return float(np.interp(age, self.grid.nodes, self.values))

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def is_constant(self, rtol: float = 1e-12) -> bool:
        first = self.values[0]
        return bool(np.allclose(self.values, first, rtol=rtol, atol=0.0))


def integrate(p: Profile) -> float:
    """Composite trapezoid approximation of ∫_0^{a_max} p(a) da."""
    return float(sp_integrate.trapezoid(p.values, dx=p.grid.step))


def cumulative_integral(p: Profile) -> Profile:
    """F(a_k) = ∫_0^{a_k} p by the composite trapezoid; F(0) = 0."""
    return Profile(p.grid, sp_integrate.cumulative_trapezoid(p.values, dx=p.grid.step, initial=0.0))


def inner(p: Profile, q: Profile) -> float:
    return integrate(p * q)


def exponential_convolution(f: Profile, rate: float) -> Profile:
    """
    y(a) = ∫_0^a f(σ) e^{-rate (a-σ)} dσ, composite trapezoid, y(0) = 0.

    Uses y_k = d y_{k-1} + Δ/2 (d f_{k-1} + f_k), d = e^{-rate Δ}, which is exactly
    the trapezoid of the whole integral because the exponential factor splits.
    """
    dx = f.grid.step
    decay = float(np.exp(-rate * dx))
    v = f.values
    drive = np.zeros_like(v)
    drive[1:] = 0.5 * dx * (decay * v[:-1] + v[1:])
    return Profile(f.grid, lfilter([1.0], [1.0, -decay], drive))


def exponential_tail(g: Profile, rate: float) -> Profile:
    """
    y(a) = ∫_a^{a_max} g(x) e^{-rate (x-a)} dx.

    Backward trapezoid recursion, then half a cell moved between the two end
    nodes so that ∫ g · exponential_convolution(f) = ∫ f · exponential_tail(g)
    holds to rounding for every f, g.
    """
    dx = g.grid.step
    decay = float(np.exp(-rate * dx))
    v = g.values[::-1]
    drive = np.zeros_like(v)
    drive[1:] = 0.5 * dx * (decay * v[:-1] + v[1:])
    y = lfilter([1.0], [1.0, -decay], drive)[::-1].copy()
    y[0] -= 0.5 * dx * g.values[0]
    y[-1] += 0.5 * dx * g.values[-1]
    return Profile(g.grid, y)
