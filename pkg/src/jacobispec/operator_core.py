"""Coefficient models and their finite matrix realizations.

A :class:`CoefficientModel` stores an explicit window of coefficients
``a_n`` (off-diagonal, coupling n to n+1) and ``b_n`` (diagonal) plus a tail
rule that extends them to all of Z. Every operator in the package is built
from one of these, so every operator is serializable and reproducible.

Matrices are ordered by ascending site index.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

HALF_PI = 0.5 * math.pi
ANGLE_TOL = 1e-12


class ModelError(ValueError):
    """Invalid coefficient model or truncation request."""


@dataclass(frozen=True)
class TailRule:
    """Rule for coefficients outside the explicit window.

    ``kind="constant"`` uses ``a_inf``/``b_inf``. ``kind="periodic"`` repeats
    ``a_period``/``b_period`` with phase fixed by absolute index:
    ``a_n = a_period[n % p]``.
    """

    kind: str = "constant"
    a_inf: float = 1.0
    b_inf: float = 0.0
    a_period: tuple[float, ...] = ()
    b_period: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "constant":
            if not self.a_inf > 0:
                raise ModelError("tail a_inf must be positive")
        elif self.kind == "periodic":
            p = len(self.a_period)
            if p == 0 or len(self.b_period) != p:
                raise ModelError("periodic tail needs equal-length a/b periods")
            if min(self.a_period) <= 0:
                raise ModelError("periodic tail a values must be positive")
        else:
            raise ModelError(f"unknown tail kind {self.kind!r}")

    @property
    def period(self) -> int:
        return 1 if self.kind == "constant" else len(self.a_period)

    def a(self, idx: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(idx.shape, float(self.a_inf))
        return np.asarray(self.a_period, dtype=float)[np.mod(idx, self.period)]

    def b(self, idx: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(idx.shape, float(self.b_inf))
        return np.asarray(self.b_period, dtype=float)[np.mod(idx, self.period)]

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "params": {"a": self.a_inf, "b": self.b_inf}}
        return {"kind": "periodic",
                "params": {"a": list(self.a_period), "b": list(self.b_period)}}

    @classmethod
    def from_dict(cls, d: dict) -> "TailRule":
        params = d.get("params", {})
        if d["kind"] == "constant":
            return cls("constant", float(params.get("a", 1.0)), float(params.get("b", 0.0)))
        if d["kind"] == "periodic":
            return cls("periodic", a_period=tuple(float(x) for x in params["a"]),
                       b_period=tuple(float(x) for x in params["b"]))
        raise ModelError(f"unknown tail kind {d['kind']!r}")


@dataclass(frozen=True)
class CoefficientModel:
    """Jacobi coefficients: explicit values on a window plus a tail rule.

    ``a[i]`` is a_{window_start+i} and ``b[i]`` is b_{window_start+i}; the two
    windows share ``window_start`` but may differ in length.
    """

    window_start: int = 0
    a: tuple[float, ...] = ()
    b: tuple[float, ...] = ()
    tail: TailRule = field(default_factory=TailRule)

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        if any(not x > 0 for x in self.a):
            raise ModelError("off-diagonal coefficients a_n must be positive")
        if not all(math.isfinite(x) for x in self.a + self.b):
            raise ModelError("coefficients must be finite")

    @classmethod
    def free(cls) -> "CoefficientModel":
        return cls()

    def a_at(self, idx) -> np.ndarray:
        """Vectorized a_n (coupling between n and n+1)."""
        idx = np.asarray(idx, dtype=np.int64)
        out = self.tail.a(idx)
        rel = idx - self.window_start
        inside = (rel >= 0) & (rel < len(self.a))
        if inside.any():
            out[inside] = np.asarray(self.a)[rel[inside]]
        return out

    def b_at(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        out = self.tail.b(idx)
        rel = idx - self.window_start
        inside = (rel >= 0) & (rel < len(self.b))
        if inside.any():
            out[inside] = np.asarray(self.b)[rel[inside]]
        return out

    def a_n(self, n: int) -> float:
        return float(self.a_at(np.array([n]))[0])

    def b_n(self, n: int) -> float:
        return float(self.b_at(np.array([n]))[0])

    @property
    def explicit_range(self) -> tuple[int, int]:
        """Smallest index range [lo, hi] outside of which the tail rule applies."""
        length = max(len(self.a), len(self.b))
        return self.window_start, self.window_start + length - 1

    def sup_norm_bound(self) -> float:
        """Upper bound for the operator norm: 2 sup a + sup |b|."""
        tail = self.tail
        a_vals = list(self.a) + ([tail.a_inf] if tail.kind == "constant" else list(tail.a_period))
        b_vals = list(self.b) + ([tail.b_inf] if tail.kind == "constant" else list(tail.b_period))
        return 2.0 * max(a_vals) + max(abs(x) for x in b_vals)

    def to_dict(self) -> dict:
        return {"window_start": self.window_start, "a": list(self.a), "b": list(self.b),
                "tail": self.tail.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientModel":
        return cls(int(d.get("window_start", 0)), tuple(d.get("a", ())), tuple(d.get("b", ())),
                   TailRule.from_dict(d.get("tail", {"kind": "constant"})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "CoefficientModel":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class IndexWindow:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ModelError(f"empty window [{self.lo}, {self.hi}]")

    @classmethod
    def symmetric(cls, n: int) -> "IndexWindow":
        return cls(-n, n)

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def pos(self, n: int) -> int:
        """Matrix position of site ``n``."""
        if not self.lo <= n <= self.hi:
            raise ModelError(f"site {n} outside window [{self.lo}, {self.hi}]")
        return n - self.lo

    def __contains__(self, n) -> bool:
        return self.lo <= n <= self.hi


@dataclass(frozen=True)
class TruncatedOperator:
    """Real symmetric tridiagonal matrix on an index window.

    ``diag[i]`` sits at site ``window.lo + i`` and ``offdiag[i]`` couples sites
    ``lo+i`` and ``lo+i+1``. ``corrections`` are rank-one diagonal additions
    (site, value) already folded into the matrix but kept for bookkeeping.
    A zero off-diagonal marks a direct-sum split.
    """

    window: IndexWindow
    diag: np.ndarray
    offdiag: np.ndarray
    corrections: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        off = np.asarray(self.offdiag, dtype=float)
        if diag.shape != (self.window.size,) or off.shape != (self.window.size - 1,):
            raise ModelError("diag/offdiag lengths do not match the window")
        if (off < 0).any():
            raise ModelError("off-diagonal entries must be non-negative")
        diag.setflags(write=False)
        off.setflags(write=False)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", off)

    @property
    def size(self) -> int:
        return self.window.size

    @property
    def indices(self) -> np.ndarray:
        return self.window.indices

    def matrix(self) -> np.ndarray:
        m = np.diag(self.diag)
        if self.size > 1:
            i = np.arange(self.size - 1)
            m[i, i + 1] = self.offdiag
            m[i + 1, i] = self.offdiag
        return m

    def delta(self, n: int) -> np.ndarray:
        v = np.zeros(self.size)
        v[self.window.pos(n)] = 1.0
        return v

    def norm_bound(self) -> float:
        off = np.concatenate([[0.0], self.offdiag, [0.0]])
        return float(np.max(np.abs(self.diag) + off[:-1] + off[1:]))

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Matrix-vector (or matrix-matrix) product without forming the matrix."""
        psi = np.asarray(psi)
        out = self.diag.reshape((-1,) + (1,) * (psi.ndim - 1)) * psi
        if self.size > 1:
            off = self.offdiag.reshape((-1,) + (1,) * (psi.ndim - 1))
            out[:-1] += off * psi[1:]
            out[1:] += off * psi[:-1]
        return out


def tan_cot(theta: float) -> tuple[float | None, float | None]:
    """(tan θ, cot θ) with ``None`` marking the infinite cases θ=π/2 and θ=0."""
    theta = float(theta)
    if not 0.0 <= theta < math.pi:
        raise ModelError(f"boundary angle {theta} outside [0, pi)")
    t = None if abs(theta - HALF_PI) < ANGLE_TOL else math.tan(theta)
    ct = None if theta < ANGLE_TOL else math.cos(theta) / math.sin(theta)
    return t, ct


def build_window(model: CoefficientModel, window: IndexWindow) -> TruncatedOperator:
    """Dirichlet truncation of J to an arbitrary index window."""
    idx = window.indices
    return TruncatedOperator(window, model.b_at(idx), model.a_at(idx[:-1]))


def build_whole_line(model: CoefficientModel, n: int) -> TruncatedOperator:
    """J restricted to [-n, n]."""
    if n < 1:
        raise ModelError("n must be >= 1")
    return build_window(model, IndexWindow.symmetric(n))


def build_half_line(model: CoefficientModel, side: str, theta: float, n: int,
                    coupling: float = 1.0) -> TruncatedOperator:
    """Truncated half-line operator with boundary angle θ.

    side ``"+"``: sites [1, n], J_+ - coupling*tanθ <δ_1,.>δ_1. At θ=π/2 site 1
    is removed (shifted sequences), leaving [2, n].

    side ``"-"``: sites [-n, 0], J_- - coupling*cotθ <δ_0,.>δ_0. At θ=0 site 0
    is removed, leaving [-n, -1].

    ``coupling=1`` is the plain rank-one modification; passing a_0 makes the
    operator encode the boundary condition u(0)cosθ + u(1)sinθ = 0 exactly.
    """
    t, ct = tan_cot(theta)
    if side == "+":
        if t is None:
            if n < 2:
                raise ModelError("theta=pi/2 on the + side needs n >= 2")
            return build_window(model, IndexWindow(2, n))
        op = build_window(model, IndexWindow(1, n))
        corr = -coupling * t
        site = 1
    elif side == "-":
        if ct is None:
            return build_window(model, IndexWindow(-n, -1))
        op = build_window(model, IndexWindow(-n, 0))
        corr = -coupling * ct
        site = 0
    else:
        raise ModelError(f"side must be '+' or '-', got {side!r}")
    if corr == 0.0:
        return op
    diag = op.diag.copy()
    diag[op.window.pos(site)] += corr
    return TruncatedOperator(op.window, diag, op.offdiag, ((site, corr),))


def direct_sum_from(op: TruncatedOperator, theta: float) -> TruncatedOperator:
    """J_θ = J_-^θ ⊕ J_+^θ on the window of ``op`` (must contain 0 and 1).

    The 0–1 coupling a_0 is cut and the boundary corrections are
    -a_0 cotθ at site 0 and -a_0 tanθ at site 1, so that J_θ u = J u whenever
    u(0)cosθ + u(1)sinθ = 0. At θ=0 (θ=π/2) site 0 (site 1) becomes an isolated
    site keeping its diagonal value; it carries the infinite-coupling limit and
    is invisible to vectors vanishing there.
    """
    t, ct = tan_cot(theta)
    p0, p1 = op.window.pos(0), op.window.pos(1)
    a0 = float(op.offdiag[p0])
    diag = op.diag.copy()
    off = op.offdiag.copy()
    off[p0] = 0.0
    corrections = list(op.corrections)
    if ct is None:
        if p0 > 0:
            off[p0 - 1] = 0.0
    elif ct != 0.0:
        diag[p0] -= a0 * ct
        corrections.append((0, -a0 * ct))
    if t is None:
        if p1 < op.size - 1:
            off[p1] = 0.0
    elif t != 0.0:
        diag[p1] -= a0 * t
        corrections.append((1, -a0 * t))
    return TruncatedOperator(op.window, diag, off, tuple(corrections))


def build_direct_sum(model: CoefficientModel, theta: float, n: int) -> TruncatedOperator:
    """Block-diagonal J_θ on [-n, n]."""
    return direct_sum_from(build_whole_line(model, n), theta)
