"""Solutions of the eigenvalue recurrence and half-line subordinacy.

Solutions are propagated away from the boundary pair (0, 1): to +inf from
(u(0), u(1)) or to -inf from (u(1), u(0)). Hyperbolic energies grow like
e^{cL}, so values are stored with a per-index rescaling count and all norms
are handled in log space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .kernels import RESCALE
from .operator_core import CoefficientModel

_LOG_RESCALE = math.log(RESCALE)


@dataclass(frozen=True)
class SolutionSample:
    """A solution on the sites 0..L (side ``+``) or 1..-L (side ``-``).

    ``values[k]`` is stored at ``sites[k]``; the true value is
    ``values[k] * RESCALE**counts[k]``. ``steps`` counts distance from the
    boundary: for side ``+`` step k is site k, for side ``-`` it is site 1-k.
    """

    side: str
    energy: float
    sites: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    zero: bool = False

    def __getitem__(self, n: int) -> float:
        k = n if self.side == "+" else 1 - n
        if not 0 <= k < len(self.values):
            raise IndexError(f"site {n} not computed")
        return float(self.values[k] * RESCALE ** self.counts[k]) if self.counts[k] else float(self.values[k])

    def as_dict(self) -> dict[int, float]:
        return {int(s): self[int(s)] for s in self.sites}

    @property
    def rescaled(self) -> bool:
        return bool(self.counts[-1] > 0)

    def log_partial_sums(self) -> np.ndarray:
        """log of sum_{j=1}^{k} |u(j)|^2 over the half-line sites (index k-1)."""
        return kernels.log_cumsumsq(self.values[1:], self.counts[1:])


def _path_coefficients(model: CoefficientModel, side: str, length: int):
    """Sites, couplings and diagonals along the propagation path."""
    k = np.arange(length + 1)
    if side == "+":
        sites = k
        c = model.a_at(k[:-1])          # coupling s_k=k to k+1 is a_k
    elif side == "-":
        sites = 1 - k
        c = model.a_at(-k[:-1])         # coupling 1-k to -k is a_{-k}
    else:
        raise ValueError(f"side must be '+' or '-', got {side!r}")
    return sites, c, model.b_at(sites)


def solve(model: CoefficientModel, E: float, side: str, u_prev: float, u_next: float,
          L_max: int) -> SolutionSample:
    """Propagate a solution of the recurrence away from the boundary pair.

    For side ``+`` the initial data are (u(0), u(1)); for side ``-`` they are
    (u(1), u(0)). The result covers L_max + 1 sites.
    """
    if L_max < 2:
        raise ValueError("L_max must be >= 2")
    sites, c, d = _path_coefficients(model, side, int(L_max))
    values, counts = kernels.propagate(c, d, E, u_prev, u_next)
    return SolutionSample(side, float(E), sites, values, counts,
                          zero=(u_prev == 0.0 and u_next == 0.0))


def boundary_solution(model: CoefficientModel, theta: float, E: float, side: str = "+",
                      L_max: int = 1000) -> SolutionSample:
    """u_{θ,E}: u(0) = -sinθ, u(1) = cosθ, propagated to the given side."""
    u0, u1 = -math.sin(theta), math.cos(theta)
    if side == "+":
        return solve(model, E, side, u0, u1, L_max)
    return solve(model, E, side, u1, u0, L_max)


def log_norm_L(u: SolutionSample, L: float) -> float:
    """log of the interpolated norm ||u||_L (see :func:`norm_L`)."""
    if not L > 1:
        raise ValueError("L must be > 1")
    n = int(math.floor(L))
    if n + 1 >= len(u.values):
        raise ValueError(f"solution too short for L={L}")
    sums = u.log_partial_sums()
    head = sums[n - 1]
    frac = L - n
    if frac == 0.0:
        return 0.5 * head
    v = u.values[n + 1]
    if v == 0.0:
        return 0.5 * head
    tail = math.log(frac) + 2.0 * (math.log(abs(v)) + u.counts[n + 1] * _LOG_RESCALE)
    return 0.5 * float(np.logaddexp(head, tail))


def norm_L(u: SolutionSample, L: float) -> float:
    """[sum_{n=1}^{[L]} |u(n)|^2 + (L - [L]) |u([L]+1)|^2]^{1/2}.

    Sites are counted from the boundary: n=1 is site 1 for side ``+`` and
    site 0 for side ``-``. Returns ``inf`` when the norm exceeds the float
    range; :func:`log_norm_L` stays finite.
    """
    log_value = log_norm_L(u, L)
    return math.exp(log_value) if log_value < 709.0 else math.inf


def _log_norms_at(u: SolutionSample, Ls: np.ndarray) -> np.ndarray:
    sums = u.log_partial_sums()
    return 0.5 * sums[np.asarray(Ls, dtype=np.int64) - 1]


@dataclass(frozen=True)
class SubordinacyVerdict:
    """Outcome of the subordinacy search at one energy and side.

    ``status`` is ``"subordinate"``, ``"none_detected"`` or ``"inconclusive"``;
    ``theta`` is set only when subordinate. ``ratio_trace`` lists
    (L, ||u_θ||_L / ||u_{θ+π/2}||_L) at geometric checkpoints for the best θ.
    """

    status: str
    side: str
    energy: float
    theta: float | None
    final_ratio: float
    L_max: int
    ratio_trace: list[tuple[int, float]] = field(default_factory=list)

    def csv_row(self) -> list:
        return [self.energy, self.side, self.status,
                "" if self.theta is None else repr(self.theta), repr(self.final_ratio), self.L_max]


CSV_HEADER = ["E", "side", "status", "theta", "final_ratio", "L_max"]


def checkpoints(L_max: int, count: int = 12) -> np.ndarray:
    """Geometric checkpoints in [2, L_max]."""
    pts = np.unique(np.round(np.geomspace(2, L_max, count)).astype(np.int64))
    return pts[(pts >= 2) & (pts <= L_max)]


class _RatioEvaluator:
    """ratio(θ) = ||u_θ||_L / ||u_{θ+π/2}||_L from two basis solutions.

    Any solution with boundary data (u(0), u(1)) = (-sinθ, cosθ) is
    cosθ·v - sinθ·w with v = u_{0,E} and w = -u_{π/2,E}; combining the two
    basis solutions keeps each candidate at O(L) cost with no re-propagation.
    """

    def __init__(self, model, side, E, L_max, scale=1.0):
        self.L_max = int(L_max)
        if side == "+":
            v = solve(model, E, side, 0.0, scale, L_max + 1)    # u(0)=0, u(1)=1
            w = solve(model, E, side, scale, 0.0, L_max + 1)    # u(0)=1, u(1)=0
        else:
            v = solve(model, E, side, scale, 0.0, L_max + 1)    # u(1)=1, u(0)=0
            w = solve(model, E, side, 0.0, scale, L_max + 1)    # u(1)=0, u(0)=1
        # common scale per index so that combinations are exact
        cmax = np.maximum(v.counts, w.counts)
        self.v = v.values * np.power(RESCALE, (v.counts - cmax).astype(float))
        self.w = w.values * np.power(RESCALE, (w.counts - cmax).astype(float))
        self.counts = cmax

    def _log_norms(self, theta, Ls):
        u = math.cos(theta) * self.v - math.sin(theta) * self.w
        sums = kernels.log_cumsumsq(u[1:], self.counts[1:])
        return 0.5 * sums[np.asarray(Ls, dtype=np.int64) - 1]

    def ratios(self, theta, Ls):
        eta = theta + 0.5 * math.pi
        return np.exp(self._log_norms(theta, Ls) - self._log_norms(eta, Ls))

    def ratio(self, theta):
        return float(self.ratios(theta, [self.L_max])[0])


def _golden_min(f, lo, hi, tol=1e-13, max_iter=200):
    g = 0.5 * (math.sqrt(5.0) - 1.0)
    x1 = hi - g * (hi - lo)
    x2 = lo + g * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo < tol:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - g * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + g * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def detect_subordinate(model: CoefficientModel, side: str, E: float, L_max: int = 100_000,
                       threshold: float = 1e-4, grid: int = 64, k_last: int = 6,
                       noise_floor: float = 1e-10, scale: float = 1.0) -> SubordinacyVerdict:
    """Search for the boundary angle whose solution is subordinate at one edge.

    A coarse grid over [0, π) brackets the minimum of ratio(θ, L_max), which
    golden-section search then refines. The verdict is ``subordinate`` when
    the ratio at L_max is below ``threshold`` and has not increased over the
    last ``k_last`` geometric checkpoints (values under ``noise_floor`` count
    as settled, since the forward recurrence cannot resolve a decaying
    solution below rounding). Otherwise ``none_detected`` if the minimal ratio
    stays above ``threshold`` and ``inconclusive`` if it dips below but does
    not settle.
    """
    ev = _RatioEvaluator(model, side, E, L_max, scale)
    thetas = np.linspace(0.0, math.pi, grid, endpoint=False)
    vals = np.array([ev.ratio(t) for t in thetas])
    i = int(np.argmin(vals))
    step = math.pi / grid
    theta, best = _golden_min(ev.ratio, thetas[i] - step, thetas[i] + step)
    theta = math.fmod(theta, math.pi)
    if theta < 0:
        theta += math.pi
    Ls = checkpoints(L_max)
    trace_vals = ev.ratios(theta, Ls)
    trace = [(int(L), float(r)) for L, r in zip(Ls, trace_vals)]
    final = float(trace_vals[-1])
    if final >= threshold:
        return SubordinacyVerdict("none_detected", side, float(E), None, final, int(L_max), trace)
    tail = trace_vals[-k_last:]
    settled = all(b <= a * (1 + 1e-6) or b < noise_floor for a, b in zip(tail[:-1], tail[1:]))
    if len(tail) == k_last and settled:
        return SubordinacyVerdict("subordinate", side, float(E), theta, final, int(L_max), trace)
    return SubordinacyVerdict("inconclusive", side, float(E), None, final, int(L_max), trace)


def wronskian(model: CoefficientModel, u: SolutionSample, v: SolutionSample) -> np.ndarray:
    """a_n (u(n+1) v(n) - u(n) v(n+1)) along the path (must be unrescaled)."""
    if u.rescaled or v.rescaled:
        raise ValueError("wronskian needs solutions without rescaling")
    if u.side == "+":
        a = model.a_at(u.sites[:-1])
    else:
        a = model.a_at(u.sites[1:])
    return a * (u.values[1:] * v.values[:-1] - u.values[:-1] * v.values[1:])
