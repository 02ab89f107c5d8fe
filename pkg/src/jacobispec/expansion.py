"""Eigenfunction expansion of the singular part through subordinate solutions.

For a finite (pure-point) model every atom E_i carries μ-mass
ψ_i(0)^2 + ψ_i(1)^2 where μ = μ_00 + μ_11. The subordinate solution
normalized by u(0)^2 + u(1)^2 = 1 is ψ_i rescaled, and the kernel
Φ(E) = <u_E, ·> u_E integrated against μ reproduces every spectral projection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .herglotz import EpsSchedule, extrapolate_zero, resolvent_columns
from .recurrence import solve
from .spectral_measures import EigenSystem, WeightOperator

# ψ(0), ψ(1) are accurate to ~1e-16 absolute, so masses below ~1e-30 are rounding noise
MASS_FLOOR = 1e-28


class DegenerateBoundaryError(ValueError):
    """The eigenvector vanishes at both 0 and 1, so μ gives it no mass."""


@dataclass(frozen=True)
class SubordinateAmplitude:
    energy: float
    atom_index: int
    sites: np.ndarray
    values: np.ndarray
    mu_mass: float

    @property
    def u0(self) -> float:
        return float(self.values[np.searchsorted(self.sites, 0)])

    @property
    def u1(self) -> float:
        return float(self.values[np.searchsorted(self.sites, 1)])

    @property
    def norm01(self) -> float:
        return math.hypot(self.u0, self.u1)


def subordinate_amplitude(sys: EigenSystem, atom_index: int) -> SubordinateAmplitude:
    """u_E = ψ_i / sqrt(ψ_i(0)^2 + ψ_i(1)^2) with u(1) >= 0 (ties: u(0) > 0)."""
    psi = sys.vectors[:, atom_index]
    p0, p1 = psi[sys.window.pos(0)], psi[sys.window.pos(1)]
    mass = p0 * p0 + p1 * p1
    if mass <= MASS_FLOOR:
        raise DegenerateBoundaryError(
            f"atom {atom_index} (E={sys.energies[atom_index]:.12g}) has psi(0)^2+psi(1)^2={mass:.3e}")
    u = psi / math.sqrt(mass)
    if p1 < 0 or (p1 == 0 and p0 < 0):
        u = -u
    return SubordinateAmplitude(float(sys.energies[atom_index]), int(atom_index),
                                sys.window.indices, u, float(mass))


def amplitudes(sys: EigenSystem):
    """All amplitudes, plus the indices excluded for a degenerate boundary pair."""
    amps, excluded = [], []
    for i in range(sys.size):
        try:
            amps.append(subordinate_amplitude(sys, i))
        except DegenerateBoundaryError:
            excluded.append(i)
    return amps, excluded


def amplitude_by_recurrence(sys: EigenSystem, amp: SubordinateAmplitude) -> np.ndarray:
    """Rebuild u_E on the window by propagating (u(0), u(1)) both ways.

    Uses the truncation's own coefficients, so the Dirichlet edges of the
    window are respected automatically.
    """
    from .operator_core import CoefficientModel, TailRule

    op = sys.op
    local = CoefficientModel(op.window.lo, tuple(op.offdiag) + (1.0,), tuple(op.diag),
                             TailRule("constant", 1.0, 0.0))
    hi_len = op.window.hi
    lo_len = 1 - op.window.lo
    out = np.zeros(op.size)
    if hi_len >= 2:
        plus = solve(local, amp.energy, "+", amp.u0, amp.u1, hi_len)
        for n in range(0, op.window.hi + 1):
            out[op.window.pos(n)] = plus[n]
    else:
        out[op.window.pos(0)] = amp.u0
        out[op.window.pos(1)] = amp.u1
    if lo_len >= 2:
        minus = solve(local, amp.energy, "-", amp.u1, amp.u0, lo_len)
        for n in range(op.window.lo, 1):
            out[op.window.pos(n)] = minus[n]
    return out


def kernel_matrix(amp: SubordinateAmplitude) -> np.ndarray:
    """Φ(E) = <u_E, ·> u_E as a matrix on the window."""
    return np.outer(amp.values, amp.values)


def reconstruct_singular(sys: EigenSystem, atoms, psi: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """sum_{E in B} <u_E, ψ> u_E μ({E}); returns (vector, excluded atom indices).

    ``psi`` may be a matrix, in which case every column is expanded.
    """
    psi = np.asarray(psi, dtype=float)
    out = np.zeros_like(psi)
    excluded = []
    for i in sorted(atoms):
        try:
            amp = subordinate_amplitude(sys, i)
        except DegenerateBoundaryError:
            excluded.append(i)
            continue
        out += amp.mu_mass * np.multiply.outer(amp.values, amp.values @ psi)
    return out, excluded


def weighted_norm(psi: np.ndarray, weight: WeightOperator, sign: str, window) -> float:
    """Norm in l^2(Z; w^{±1}): (sum |ψ(n)|^2 w(n)^{∓1})^{1/2}."""
    w = weight.on(window)
    psi = np.asarray(psi)
    if sign == "+":
        return float(np.sqrt(np.sum(np.abs(psi) ** 2 / w)))
    if sign == "-":
        return float(np.sqrt(np.sum(np.abs(psi) ** 2 * w)))
    raise ValueError("sign must be '+' or '-'")


def kernel_norm_weighted(amp: SubordinateAmplitude, weight: WeightOperator, window) -> float:
    """Norm of Φ(E) from D(A) (graph norm ||Aψ||) to its dual (norm ||A^{-1}ψ||).

    Equals sum_n u_E(n)^2 / w(n) by Cauchy–Schwarz.
    """
    return float(np.sum(amp.values ** 2 / weight.on(window)))


@dataclass(frozen=True)
class GammaMatrix:
    energy: float
    sites: np.ndarray
    entries: np.ndarray
    trace_eps: np.ndarray = field(repr=False, default=None)
    converged: bool = True
    asymmetry: float = 0.0

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.entries, compute_uv=False)

    def factor(self) -> np.ndarray:
        """u with Γ = u u^T, signed so u(1) >= 0 (ties: u(0) > 0)."""
        w, V = np.linalg.eigh(self.entries)
        u = V[:, -1] * math.sqrt(max(w[-1], 0.0))
        i0, i1 = np.searchsorted(self.sites, 0), np.searchsorted(self.sites, 1)
        if u[i1] < 0 or (u[i1] == 0 and u[i0] < 0):
            u = -u
        return u


def gamma_estimate(sys: EigenSystem, E: float, n: int | None = None,
                   sched: EpsSchedule = EpsSchedule(), order: int = 5,
                   tol: float = 1e-8) -> GammaMatrix:
    """Γ(E)_kj = lim M_kj(E+iε) / M(E+iε), M = M_00 + M_11, for k, j in [-n, n].

    Resolvent entries come from linear solves with J - (E+iε), independent
    of the eigenvectors. Near an atom both M_kj and M diverge like 1/ε, so
    the residues -iε M_kj and -iε M are extrapolated separately and divided.
    The returned entries are symmetrized; ``asymmetry`` records the largest
    |Γ_kj - Γ_jk| before that step.
    """
    op = sys.op
    if n is None:
        sites = op.window.indices
    else:
        sites = np.arange(-n, n + 1)
    pos = np.array([op.window.pos(int(s)) for s in sites])
    eps = sched.eps
    res = np.empty((len(eps), len(sites), len(sites)), dtype=complex)
    resM = np.empty(len(eps), dtype=complex)
    p0, p1 = op.window.pos(0), op.window.pos(1)
    for t, e in enumerate(eps):
        G = resolvent_columns(op, E + 1j * e, sites)
        block = G[pos, :]
        res[t] = -1j * e * block
        resM[t] = -1j * e * (G[p0, np.searchsorted(sites, 0)] + G[p1, np.searchsorted(sites, 1)]) \
            if (0 in sites and 1 in sites) else -1j * e * _m_from_solve(op, E + 1j * e)
    den = extrapolate_zero(eps, resM, order)
    den_prev = extrapolate_zero(eps[:-1], resM[:-1], order)
    num = extrapolate_zero(eps, res, order)
    num_prev = extrapolate_zero(eps[:-1], res[:-1], order)
    drift = float(np.max(np.abs(num / den - num_prev / den_prev)))
    raw = num / den
    asymmetry = float(np.max(np.abs(raw - raw.T)))
    gamma = 0.5 * (raw.real + raw.real.T)
    return GammaMatrix(float(E), sites, gamma, eps, bool(drift <= tol * max(1.0, np.abs(gamma).max())),
                       asymmetry)


def _m_from_solve(op, z):
    G = resolvent_columns(op, z, [0, 1])
    return G[op.window.pos(0), 0] + G[op.window.pos(1), 1]


def expansion_report(sys: EigenSystem, psi: np.ndarray | None = None) -> dict:
    """Per-atom audit: energy, μ-mass, boundary pair, reconstruction error."""
    rows = []
    if psi is None:
        psi = np.ones(sys.size) / math.sqrt(sys.size)
    for i in range(sys.size):
        v = sys.vectors[:, i]
        proj = (v @ psi) * v
        try:
            amp = subordinate_amplitude(sys, i)
        except DegenerateBoundaryError:
            rows.append({"E": float(sys.energies[i]), "mu_mass": float(v[sys.window.pos(0)] ** 2 +
                                                                       v[sys.window.pos(1)] ** 2),
                         "u0": None, "u1": None, "reconstruction_error": None, "excluded": True})
            continue
        rec = (amp.values @ psi) * amp.mu_mass * amp.values
        rows.append({"E": amp.energy, "mu_mass": amp.mu_mass, "u0": amp.u0, "u1": amp.u1,
                     "reconstruction_error": float(np.max(np.abs(rec - proj))), "excluded": False})
    return {"atoms": rows}
