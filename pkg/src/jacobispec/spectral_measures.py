"""Eigensystems of truncations and the spectral measures they carry.

On a finite window the spectrum is pure point, so every spectral measure is
a :class:`~jacobispec.herglotz.DiscreteMeasure` read off the eigenvectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .herglotz import (DiscreteMeasure, EpsSchedule, LimitEstimate, extrapolate_zero,
                       poltoratskii_ratio)
from .operator_core import IndexWindow, TruncatedOperator


class DegeneracyError(RuntimeError):
    """Eigensolver residual or orthonormality check failed."""


class UndefinedPointError(ValueError):
    """The reference measure gives no mass near the requested point."""


@dataclass(frozen=True)
class EigenSystem:
    """Ascending energies and orthonormal eigenvectors (columns) of an operator.

    Sign convention: the first entry of each vector above 1e-12 in modulus
    is positive.
    """

    op: TruncatedOperator
    energies: np.ndarray
    vectors: np.ndarray

    @property
    def window(self) -> IndexWindow:
        return self.op.window

    @property
    def size(self) -> int:
        return len(self.energies)

    def row(self, n: int) -> np.ndarray:
        """Entries ψ_i(n) of all eigenvectors at site n."""
        return self.vectors[self.window.pos(n)]

    def projector(self, atoms) -> np.ndarray:
        """Spectral projection onto the span of the listed eigenvectors."""
        idx = np.asarray(sorted(atoms), dtype=np.int64)
        if idx.size == 0:
            return np.zeros((self.size, self.size))
        V = self.vectors[:, idx]
        return V @ V.T

    def residual(self) -> float:
        return float(np.max(np.linalg.norm(self.op.apply(self.vectors) - self.vectors * self.energies,
                                           axis=0)))

    def to_csv_rows(self):
        yield ["energy"] + [f"psi({n})" for n in self.window.indices]
        for i, E in enumerate(self.energies):
            yield [repr(float(E))] + [repr(float(x)) for x in self.vectors[:, i]]


@dataclass(frozen=True)
class WeightOperator:
    """w(n) = max(n^2, 1): the square of the regularized position operator."""

    def __call__(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return np.maximum(n * n, 1.0)

    def on(self, window: IndexWindow) -> np.ndarray:
        return self(window.indices)


def _fix_signs(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for i in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, i]) > 1e-12)
        if nz.size and V[nz[0], i] < 0:
            V[:, i] *= -1.0
    return V


def eigendecompose(op: TruncatedOperator, check: bool = True) -> EigenSystem:
    """Full eigendecomposition of a symmetric tridiagonal operator."""
    if op.size == 1:
        E, V = op.diag.copy(), np.ones((1, 1))
    else:
        E, V = eigh_tridiagonal(op.diag, op.offdiag)
    V = _fix_signs(V)
    sys = EigenSystem(op, E, V)
    if check:
        scale = max(op.norm_bound(), 1.0)
        res = sys.residual()
        orth = float(np.max(np.abs(V.T @ V - np.eye(op.size))))
        if res > 1e-10 * scale or orth > 1e-12 * max(1.0, op.size / 10):
            raise DegeneracyError(f"eigensolve check failed: residual={res:.3e}, orth={orth:.3e}")
    return sys


def _merge(E: np.ndarray, w: np.ndarray, tol: float, positive: bool) -> DiscreteMeasure:
    pos, wts = [], []
    for e, x in zip(E, w):
        if pos and e - pos[-1][-1] <= tol:
            pos[-1].append(e)
            wts[-1].append(x)
        else:
            pos.append([e])
            wts.append([x])
    return DiscreteMeasure(np.array([p[0] for p in pos]),
                           np.array([math.fsum(x) for x in wts]), positive)


def merge_tol(sys: EigenSystem) -> float:
    return 1e-9 * max(sys.op.norm_bound(), 1.0)


def spectral_measure(sys: EigenSystem, psi: np.ndarray) -> DiscreteMeasure:
    """μ_ψ: atoms (E_i, |<ψ_i, ψ>|^2), numerically equal energies merged."""
    c = sys.vectors.T @ np.asarray(psi, dtype=float)
    return _merge(sys.energies, c * c, merge_tol(sys), True)


def joint_measure(sys: EigenSystem, k: int, j: int) -> DiscreteMeasure:
    """μ_kj: signed atoms (E_i, ψ_i(k) ψ_i(j))."""
    w = sys.row(k) * sys.row(j)
    return _merge(sys.energies, w, merge_tol(sys), k == j)


def boundary_measure(sys: EigenSystem) -> DiscreteMeasure:
    """μ = μ_00 + μ_11, the reference measure for the whole-line problem."""
    w = sys.row(0) ** 2 + sys.row(1) ** 2
    return _merge(sys.energies, w, merge_tol(sys), True)


def rn_derivative(nu: DiscreteMeasure, mu: DiscreteMeasure, E: float, mode: str = "interval_ratio",
                  sched: EpsSchedule = EpsSchedule(), order: int = 5) -> LimitEstimate:
    """dν/dμ at E along the schedule.

    ``interval_ratio``: ν((E-ε, E+ε)) / μ((E-ε, E+ε)); at an isolated atom this
    is constant once ε is below the gap, so the last value is the limit.
    ``borel_ratio``: delegates to :func:`poltoratskii_ratio`.
    """
    if mode == "borel_ratio":
        return poltoratskii_ratio(nu, mu, E, sched, order)
    if mode != "interval_ratio":
        raise ValueError(f"unknown mode {mode!r}")
    eps = sched.eps
    num = np.array([nu.mass(E - e, E + e) for e in eps])
    den = np.array([mu.mass(E - e, E + e) for e in eps])
    if not (den != 0).any():
        raise UndefinedPointError(f"mu has no mass near E={E}")
    vals = np.where(den != 0, num / np.where(den != 0, den, 1.0), np.nan).astype(complex)
    limit = complex(vals[-1])
    converged = bool(np.isfinite(vals[-1].real) and abs(vals[-1] - vals[-2]) <= 1e-12 * max(1, abs(limit)))
    return LimitEstimate(eps, vals, limit, converged, {"mode": mode, "numerator": num})


def novm_theta(sys: EigenSystem, weight: WeightOperator, atoms) -> np.ndarray:
    """Θ(B) = A^{-1} P(B) A^{-1} with A = sqrt(w), B given as atom indices."""
    inv_a = 1.0 / np.sqrt(weight.on(sys.window))
    P = sys.projector(atoms)
    return inv_a[:, None] * P * inv_a[None, :]


def trace_bound(weight: WeightOperator, window: IndexWindow) -> float:
    return math.fsum(1.0 / weight.on(window))


def singular_projection_composition(sys: EigenSystem, atoms) -> np.ndarray:
    """J·P(A) for the atom set A."""
    return sys.op.apply(sys.projector(atoms))


def krylov_rank(op: TruncatedOperator, vectors, tol: float = 1e-10) -> int:
    """Dimension of span{J^n v : v in vectors, n >= 0} (orthonormalized build)."""
    basis = []
    frontier = [np.asarray(v, dtype=float) for v in vectors]
    for _ in range(op.size + 1):
        new = []
        for v in frontier:
            w = v.copy()
            for _ in range(2):
                for q in basis:
                    w -= (q @ w) * q
            nrm = np.linalg.norm(w)
            if nrm > tol * max(1.0, np.linalg.norm(v)):
                q = w / nrm
                basis.append(q)
                new.append(q)
        if not new:
            break
        frontier = [op.apply(q) for q in new]
    return len(basis)


def residue_limit(values: np.ndarray, eps: np.ndarray, order: int = 5) -> complex:
    """lim_{ε->0} of -iε f(E+iε) by extrapolation."""
    return extrapolate_zero(eps, -1j * eps * values, order)
