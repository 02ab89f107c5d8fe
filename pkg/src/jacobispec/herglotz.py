"""Borel transforms, Weyl m-functions and boundary-value ratio limits.

Every limit eps -> 0 is realized along a geometric :class:`EpsSchedule` with
polynomial (Richardson/Neville) extrapolation of the last few terms. Traces
are always returned so callers can check convergence behaviour.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .operator_core import (CoefficientModel, ModelError, build_half_line, build_window,
                            IndexWindow, tan_cot)


class PoleError(ZeroDivisionError):
    """Evaluation point coincides with an atom (or a perturbation pole)."""


class ConvergenceError(RuntimeError):
    """Two successive approximations disagree beyond tolerance."""

    def __init__(self, message, values=()):
        super().__init__(message)
        self.values = tuple(values)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many atoms (E_i, w_i), positions strictly increasing.

    Signed weights are allowed (joint measures); ``positive`` marks a
    genuine positive measure.
    """

    positions: np.ndarray
    weights: np.ndarray
    positive: bool = True

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if pos.shape != w.shape:
            raise ValueError("positions and weights differ in length")
        if pos.size > 1 and not (np.diff(pos) > 0).all():
            raise ValueError("atom positions must be strictly increasing")
        if self.positive and (w < 0).any():
            raise ValueError("positive measure with negative weight")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_atoms(cls, atoms, positive=True) -> "DiscreteMeasure":
        atoms = sorted(atoms)
        return cls(np.array([a[0] for a in atoms], dtype=float),
                   np.array([a[1] for a in atoms], dtype=float), positive)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def mass(self, lo: float, hi: float, closed: bool = False) -> float:
        """Mass of the open interval (lo, hi) (closed if ``closed``)."""
        if closed:
            sel = (self.positions >= lo) & (self.positions <= hi)
        else:
            sel = (self.positions > lo) & (self.positions < hi)
        return math.fsum(self.weights[sel])

    def weight_at(self, E: float, tol: float = 0.0) -> float:
        sel = np.abs(self.positions - E) <= tol
        return math.fsum(self.weights[sel])

    def atoms(self) -> list[tuple[float, float]]:
        return [(float(p), float(w)) for p, w in zip(self.positions, self.weights)]

    def to_dict(self) -> dict:
        return {"positive": self.positive, "atoms": [list(a) for a in self.atoms()]}


@dataclass(frozen=True)
class HerglotzSample:
    z: complex
    value: complex


@dataclass(frozen=True)
class EpsSchedule:
    """eps_k = eps_start * factor**k, k = 0..count-1."""

    eps_start: float = 1e-1
    factor: float = 0.5
    count: int = 20

    def __post_init__(self):
        if not (self.eps_start > 0 and 0 < self.factor < 1 and self.count >= 1):
            raise ValueError("invalid eps schedule")

    @property
    def eps(self) -> np.ndarray:
        return self.eps_start * self.factor ** np.arange(self.count)

    @classmethod
    def down_to(cls, eps_min: float, eps_start: float = 1e-1, factor: float = 0.5) -> "EpsSchedule":
        count = int(math.ceil(math.log(eps_min / eps_start) / math.log(factor))) + 1
        return cls(eps_start, factor, max(count, 1))


def extrapolate_zero(xs, ys, order: int = 5):
    """Polynomial extrapolation to x=0 from the last ``order`` samples (Neville).

    ``ys`` may carry trailing axes; extrapolation runs along the first one.
    """
    xs = np.asarray(xs, dtype=float)[-order:]
    p = np.array(ys, dtype=complex)[-order:]
    n = len(xs)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i])
    return complex(p[0]) if p.ndim == 1 else p[0]


@dataclass(frozen=True)
class LimitEstimate:
    """Trace of a boundary-value limit plus its extrapolated value."""

    eps: np.ndarray
    values: np.ndarray
    limit: complex
    converged: bool
    extra: dict = field(default_factory=dict)

    CSV_HEADER = ("eps", "re_value", "im_value", "ratio_re", "ratio_im")

    def csv_rows(self):
        """Rows eps, numerator (re, im), ratio (re, im); numerator falls back to the ratio."""
        num = self.extra.get("numerator", self.values)
        for e, x, v in zip(self.eps, num, self.values):
            x, v = complex(x), complex(v)
            yield [repr(float(e)), repr(x.real), repr(x.imag), repr(v.real), repr(v.imag)]


def borel_transform(mu: DiscreteMeasure, z: complex) -> complex:
    """M(z) = sum_i w_i / (E_i - z), largest terms first, fsum-accumulated."""
    z = complex(z)
    d = mu.positions - z
    if z.imag == 0.0 and (np.abs(d) == 0).any():
        raise PoleError(f"z={z} is an atom of the measure")
    terms = mu.weights / d
    order = np.argsort(np.abs(d), kind="stable")
    terms = terms[order]
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


# ---------------------------------------------------------------- m-functions

def herglotz_root(a2: float, b: float, z: complex) -> complex:
    """Fixed point of m = 1/(b - z - a2 m) with Im m > 0 (Im z > 0)."""
    # a2 m^2 - (b - z) m + 1 = 0
    bz = b - z
    disc = np.sqrt(complex(bz * bz - 4.0 * a2))
    r1 = (bz + disc) / (2.0 * a2)
    r2 = (bz - disc) / (2.0 * a2)
    return complex(r1 if r1.imag > r2.imag else r2)


def periodic_tail_m(a_per, b_per, z: complex) -> complex:
    """m-function of a periodic half-line starting at phase 0.

    m_0 = F_0(F_1(...F_{p-1}(m_0))) with F_k(m) = 1/(b_k - z - a_k^2 m); the
    composition is a Möbius map whose Herglotz fixed point is returned.
    """
    z = complex(z)
    M = np.eye(2, dtype=complex)
    for a, b in zip(a_per, b_per):
        # F(m) = (0*m + 1) / (-a^2 m + (b - z))
        M = M @ np.array([[0.0, 1.0], [-a * a, b - z]], dtype=complex)
    (A, B), (C, D) = M
    # C m^2 + (D - A) m - B = 0
    if abs(C) < 1e-300:
        return complex(B / (D - A))
    disc = np.sqrt((D - A) ** 2 + 4 * B * C)
    roots = [(A - D + disc) / (2 * C), (A - D - disc) / (2 * C)]
    return complex(max(roots, key=lambda r: r.imag))


def edge_m(model: CoefficientModel, start: int, direction: int, z: complex, depth: int,
           first_shift: float = 0.0) -> complex:
    """<δ_start, (J_edge - z)^{-1} δ_start> for J restricted to the ray from ``start``.

    ``direction=+1`` uses {start, start+1, ...}, ``-1`` uses {start, start-1, ...}.
    The continued fraction is walked for ``depth`` levels beyond the explicit
    window and then closed with the exact tail m-function. ``first_shift`` is
    added to the diagonal at ``start`` (rank-one boundary correction).
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("edge_m needs Im z > 0")
    lo, hi = model.explicit_range
    if direction > 0:
        stop = max(hi + 1, start) + depth
        sites = np.arange(start, stop)
        a = model.a_at(sites)
    else:
        stop = min(lo - 1, start) - depth
        sites = np.arange(start, stop, -1)
        a = model.a_at(sites - 1)
    b = model.b_at(sites).astype(float)
    b[0] += first_shift
    tail = model.tail
    nxt = int(sites[-1] + direction)
    if tail.kind == "constant":
        seed = herglotz_root(tail.a_inf ** 2, tail.b_inf, z)
    else:
        p = tail.period
        ks = nxt + direction * np.arange(p)
        a_per = tail.a(ks if direction > 0 else ks - 1)
        seed = periodic_tail_m(a_per, tail.b(ks), z)
    return kernels.cf_backward(a, b, z, seed)


def half_line_m(model: CoefficientModel, side: str, theta: float, z: complex, depth: int = 64,
                tol: float = 1e-12, check: bool = True) -> complex:
    """Weyl m-function of the half-line operator with boundary angle θ.

    side ``+``: <δ_1, (J_+ - tanθ δ_1δ_1 - z)^{-1} δ_1>; θ=π/2 drops site 1.
    side ``-``: <δ_0, (J_- - cotθ δ_0δ_0 - z)^{-1} δ_0>; θ=0 drops site 0.
    With ``check`` the continued fraction at ``depth`` and ``2*depth`` must
    agree to ``tol`` (relative), else :class:`ConvergenceError`.
    """
    t, ct = tan_cot(theta)
    if side == "+":
        start, direction, shift = (2, 1, 0.0) if t is None else (1, 1, -t)
    elif side == "-":
        start, direction, shift = (-1, -1, 0.0) if ct is None else (0, -1, -ct)
    else:
        raise ModelError(f"side must be '+' or '-', got {side!r}")
    m1 = edge_m(model, start, direction, z, depth, shift)
    if check:
        m2 = edge_m(model, start, direction, z, 2 * depth, shift)
        if abs(m1 - m2) > tol * max(abs(m2), 1e-300):
            raise ConvergenceError(f"m-function not converged at depth {depth}", (m1, m2))
        return m2
    return m1


def half_line_m_truncated(model: CoefficientModel, side: str, theta: float, z: complex,
                          depth: int) -> complex:
    """Same quantity from a Dirichlet truncation of the half-line operator."""
    op = build_half_line(model, side, theta, depth)
    n = op.size
    boundary = 0 if side == "+" else n - 1
    rhs = np.zeros(n, dtype=complex)
    rhs[boundary] = 1.0
    x = kernels.tridiag_solve(op.offdiag, op.diag - complex(z), rhs)
    return complex(x[boundary])


def perturbation_formula(m0: complex, theta: float) -> complex:
    """m_θ = m_0 / (1 - tanθ m_0)."""
    t, _ = tan_cot(theta)
    if t is None:
        raise ValueError("perturbation formula undefined at theta = pi/2")
    den = 1.0 - t * m0
    if abs(den) < 1e-300:
        raise PoleError("1 - tan(theta) m0 vanishes")
    return complex(m0 / den)


# ---------------------------------------------------------------- resolvents

def resolvent_columns(op, z: complex, sites) -> np.ndarray:
    """Columns (J - z)^{-1} δ_j of a truncated operator for the given sites."""
    sites = list(sites)
    rhs = np.zeros((op.size, len(sites)), dtype=complex)
    for c, j in enumerate(sites):
        rhs[op.window.pos(j), c] = 1.0
    return kernels.tridiag_solve(op.offdiag, op.diag - complex(z), rhs)


def whole_line_resolvent_entry(model: CoefficientModel, k: int, j: int, z: complex, n: int,
                               check_delta: int | None = None, tol: float = 1e-10) -> complex:
    """<δ_k, (J_[-n,n] - z)^{-1} δ_j>.

    With ``check_delta`` the value is compared to the [-(n+Δ), n+Δ]
    truncation and :class:`ConvergenceError` raised if they differ by more
    than ``tol``.
    """
    if complex(z).imag <= 0:
        raise ValueError("Im z must be positive")
    if max(abs(k), abs(j)) > n:
        raise ModelError("k, j must lie in [-n, n]")
    op = build_window(model, IndexWindow.symmetric(n))
    val = complex(resolvent_columns(op, z, [j])[op.window.pos(k), 0])
    if check_delta:
        op2 = build_window(model, IndexWindow.symmetric(n + check_delta))
        val2 = complex(resolvent_columns(op2, z, [j])[op2.window.pos(k), 0])
        if abs(val - val2) > tol:
            raise ConvergenceError(f"resolvent entry sensitive to truncation at n={n}", (val, val2))
    return val


# ---------------------------------------------------------------- ratio limits

def poltoratskii_ratio(nu: DiscreteMeasure, sigma: DiscreteMeasure, E: float,
                       sched: EpsSchedule = EpsSchedule(), order: int = 5,
                       tol: float = 1e-8) -> LimitEstimate:
    """Trace of M_nu(E+iε)/M_sigma(E+iε) and its ε -> 0 limit.

    When E is an atom of sigma both transforms blow up like 1/ε; the limit is
    then taken as the ratio of the separately extrapolated residues
    -iε M(E+iε), which are analytic in ε with radius set by the atom gap and
    not by the atom weight. Otherwise the ratio itself is extrapolated.
    """
    eps = sched.eps
    zs = E + 1j * eps
    num = np.array([borel_transform(nu, z) for z in zs])
    den = np.array([borel_transform(sigma, z) for z in zs])
    ratio = num / den
    at_atom = sigma.weight_at(E) != 0.0
    if at_atom:
        rn = extrapolate_zero(eps, -1j * eps * num, order)
        rd = extrapolate_zero(eps, -1j * eps * den, order)
        limit = rn / rd
        prev = extrapolate_zero(eps[:-1], (-1j * eps * num)[:-1], order) / \
            extrapolate_zero(eps[:-1], (-1j * eps * den)[:-1], order)
    else:
        limit = extrapolate_zero(eps, ratio, order)
        prev = extrapolate_zero(eps[:-1], ratio[:-1], order)
    converged = abs(limit - prev) <= tol * max(1.0, abs(limit))
    return LimitEstimate(eps, ratio, complex(limit), bool(converged),
                         {"at_atom": at_atom, "numerator": num})
