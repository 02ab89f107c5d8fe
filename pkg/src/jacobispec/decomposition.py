"""Boundary-angle resolution Q and the half-line decomposition of J.

Each mass-carrying atom E of a finite model has a subordinate amplitude
u_E whose boundary pair fixes an angle θ(E) in [0, π) through
u(0)cosθ + u(1)sinθ = 0. Q(B) is the spectral projection onto the atoms with
θ(E) in B. On Ran Q({θ}) the whole-line operator J and the split operator
J_θ = J_-^θ ⊕ J_+^θ agree, which is what makes ∫ F(J_θ) dQ(θ) = F(J) Q(I)
work.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .expansion import DegenerateBoundaryError, SubordinateAmplitude, subordinate_amplitude
from .operator_core import HALF_PI, TruncatedOperator, direct_sum_from
from .spectral_measures import EigenSystem, eigendecompose

ANGLE_GROUP_TOL = 1e-9


def theta_of_energy(u) -> float:
    """Boundary angle of a solution: the angle of (u(1), -u(0)) folded into [0, π).

    ``u`` is a :class:`SubordinateAmplitude` or a pair (u(0), u(1)).
    """
    if isinstance(u, SubordinateAmplitude):
        u0, u1 = u.u0, u.u1
    else:
        u0, u1 = u
    if u0 == 0.0 and u1 == 0.0:
        raise ValueError("zero boundary pair has no angle")
    theta = math.atan2(-u0, u1)
    if theta < 0.0:
        theta += math.pi
    if theta >= math.pi:
        theta -= math.pi
    return theta


@dataclass(frozen=True)
class AngleAtom:
    theta: float
    atom_indices: tuple[int, ...]


@dataclass(frozen=True)
class AngleInterval:
    """[lo, hi) or, with ``closed``, [lo, hi]."""

    lo: float
    hi: float
    closed: bool = False

    def __contains__(self, theta: float) -> bool:
        if self.closed:
            return self.lo <= theta <= self.hi
        return self.lo <= theta < self.hi


FULL = AngleInterval(0.0, math.pi)


def _selector(B, tol):
    if B is None:
        return lambda t: True
    if isinstance(B, AngleInterval):
        return lambda t: t in B
    if isinstance(B, tuple) and len(B) == 2 and all(isinstance(x, (int, float)) for x in B):
        iv = AngleInterval(float(B[0]), float(B[1]))
        return lambda t: t in iv
    if callable(B):
        return B
    points = [float(x) for x in B]
    return lambda t: any(abs(t - p) <= tol for p in points)


@dataclass
class QMeasure:
    """Projection-valued measure on boundary angles for a finite model."""

    sys: EigenSystem
    atoms: list[AngleAtom]
    excluded: list[int] = field(default_factory=list)
    amplitudes: dict[int, SubordinateAmplitude] = field(default_factory=dict, repr=False)
    tol: float = ANGLE_GROUP_TOL

    @property
    def op(self) -> TruncatedOperator:
        return self.sys.op

    @property
    def angles(self) -> np.ndarray:
        return np.array([a.theta for a in self.atoms])

    def select(self, B) -> list[AngleAtom]:
        f = _selector(B, self.tol)
        return [a for a in self.atoms if f(a.theta)]

    def indices(self, B) -> list[int]:
        return sorted(i for a in self.select(B) for i in a.atom_indices)

    def projector(self, B=None) -> np.ndarray:
        """Q(B) as a matrix; B is an interval, (lo, hi) pair, point set or predicate."""
        return self.sys.projector(self.indices(B))

    def min_gap(self) -> float:
        th = np.sort(self.angles)
        if th.size < 2:
            return math.pi
        gaps = np.diff(np.concatenate([th, [th[0] + math.pi]]))
        return float(gaps.min())

    def to_dict(self) -> dict:
        rows = []
        for a in self.atoms:
            for i in a.atom_indices:
                amp = self.amplitudes[i]
                mu00 = amp.u0 ** 2
                rows.append({"theta": a.theta, "E": amp.energy, "mu_mass": amp.mu_mass,
                             "u0": amp.u0, "u1": amp.u1,
                             "dmu00_dmu": mu00, "cos_theta": math.cos(a.theta),
                             "sin2_theta": math.sin(a.theta) ** 2})
        return {"atoms": rows, "excluded": [int(i) for i in self.excluded],
                "angles": [a.theta for a in self.atoms]}


def build_q(sys: EigenSystem, tol: float = ANGLE_GROUP_TOL) -> QMeasure:
    """Group mass-carrying atoms by boundary angle (within ``tol`` radians, mod π)."""
    pairs, excluded, amps = [], [], {}
    for i in range(sys.size):
        try:
            amp = subordinate_amplitude(sys, i)
        except DegenerateBoundaryError:
            excluded.append(i)
            continue
        amps[i] = amp
        th = theta_of_energy(amp)
        if th > math.pi - tol:
            th = 0.0
        pairs.append((th, i))
    pairs.sort()
    groups: list[list] = []
    for th, i in pairs:
        if groups and th - groups[-1][-1][0] <= tol:
            groups[-1].append((th, i))
        else:
            groups.append([(th, i)])
    atoms = []
    for g in groups:
        th = g[0][0]
        for ep in (0.0, HALF_PI):
            if abs(th - ep) <= tol:
                th = ep
        atoms.append(AngleAtom(th, tuple(sorted(i for _, i in g))))
    return QMeasure(sys, atoms, excluded, amps, tol)


# ------------------------------------------------------------ function calculus

@dataclass(frozen=True)
class FunctionSpec:
    """x^n (``power``), e^{itx} (``unitary``) or (x - z)^{-1} (``resolvent``)."""

    kind: str
    n: int = 1
    t: float = 0.0
    z: complex = 1j

    def __post_init__(self):
        if self.kind == "power":
            if int(self.n) != self.n or self.n < 1:
                raise ValueError("power needs an integer n >= 1")
        elif self.kind == "unitary":
            if not math.isfinite(self.t):
                raise ValueError("unitary needs finite real t")
        elif self.kind == "resolvent":
            if not complex(self.z).imag > 0:
                raise ValueError("resolvent needs Im z > 0")
        else:
            raise ValueError(f"unknown function kind {self.kind!r}")

    @classmethod
    def power(cls, n: int) -> "FunctionSpec":
        return cls("power", n=n)

    @classmethod
    def unitary(cls, t: float) -> "FunctionSpec":
        return cls("unitary", t=t)

    @classmethod
    def resolvent(cls, z: complex) -> "FunctionSpec":
        return cls("resolvent", z=complex(z))

    def __call__(self, x):
        x = np.asarray(x)
        if self.kind == "power":
            return x ** self.n
        if self.kind == "unitary":
            return np.exp(1j * self.t * x)
        return 1.0 / (x - self.z)

    def to_dict(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "n": int(self.n)}
        if self.kind == "unitary":
            return {"kind": "unitary", "t": float(self.t)}
        z = complex(self.z)
        return {"kind": "resolvent", "z": [z.real, z.imag]}

    @classmethod
    def from_dict(cls, d: dict) -> "FunctionSpec":
        if d["kind"] == "power":
            return cls.power(int(d["n"]))
        if d["kind"] == "unitary":
            return cls.unitary(float(d["t"]))
        if d["kind"] == "resolvent":
            re, im = d["z"]
            return cls.resolvent(complex(re, im))
        raise ValueError(f"unknown function kind {d['kind']!r}")

    @property
    def label(self) -> str:
        if self.kind == "power":
            return f"x^{self.n}"
        if self.kind == "unitary":
            return f"exp(i*{self.t:g}*x)"
        return f"(x-({complex(self.z):g}))^-1"


def apply_function(op: TruncatedOperator, F: FunctionSpec, check: bool = True) -> np.ndarray:
    """F(J) as a dense matrix.

    Powers are formed by repeated multiplication, e^{itJ} from the
    eigendecomposition, and the resolvent by a direct solve that is checked
    against the eigendecomposition route.
    """
    J = op.matrix()
    if F.kind == "power":
        return np.linalg.matrix_power(J, int(F.n))
    if F.kind == "unitary":
        sys = eigendecompose(op, check=False)
        V = sys.vectors
        return (V * np.exp(1j * F.t * sys.energies)) @ V.T
    z = complex(F.z)
    R = np.linalg.solve(J - z * np.eye(op.size), np.eye(op.size, dtype=complex))
    if check:
        sys = eigendecompose(op, check=False)
        V = sys.vectors
        R2 = (V / (sys.energies - z)) @ V.T
        err = float(np.max(np.abs(R - R2)))
        if err > 1e-9 / z.imag ** 2 * max(1.0, op.norm_bound()):
            raise RuntimeError(f"resolvent cross-check failed ({err:.3e})")
    return R


def resolvent_identity_defect(T: np.ndarray, S: np.ndarray, z: complex) -> float:
    """||(T-z)^-1 - (S-z)^-1 - (T-z)^-1 (S-T) (S-z)^-1||_2."""
    n = T.shape[0]
    eye = np.eye(n)
    RT = np.linalg.inv(T - z * eye)
    RS = np.linalg.inv(S - z * eye)
    return float(np.linalg.norm(RT - RS - RT @ (S - T) @ RS, 2))


# ------------------------------------------------------------ splitting defect

@dataclass(frozen=True)
class DefectReport:
    F: dict
    alpha: float
    beta: float
    theta_samples: list[float]
    lhs: list[float]
    rhs_base: float
    ratio: list[float]
    gamma: float
    vacuous: bool

    def to_dict(self) -> dict:
        return {"F": self.F, "alpha": self.alpha, "beta": self.beta,
                "theta_samples": self.theta_samples, "lhs": self.lhs, "rhs_base": self.rhs_base,
                "ratio": self.ratio, "gamma": self.gamma, "vacuous": self.vacuous}


def _check_interval(alpha, beta):
    if not alpha < beta:
        raise ValueError("need alpha < beta")
    inside_low = 0.0 < alpha and beta < HALF_PI
    inside_high = HALF_PI < alpha and beta < math.pi
    if not (inside_low or inside_high):
        raise ValueError("[alpha, beta) must lie inside (0, pi/2) or (pi/2, pi)")


def splitting_defect(q: QMeasure, F: FunctionSpec, alpha: float, beta: float, psi: np.ndarray,
                     thetas=None, strict: bool = True) -> DefectReport:
    """||F(J_θ) Q([α,β)) ψ - F(J) Q([α,β)) ψ|| at sampled θ in [α, β).

    Default samples are α, the midpoint and β⁻ = β - 1e-9 (β - α). The
    reported γ is the largest lhs / (|β - α| ||Q([α,β)) ψ||).
    """
    if strict:
        _check_interval(alpha, beta)
    if thetas is None:
        thetas = [alpha, 0.5 * (alpha + beta), beta - 1e-9 * (beta - alpha)]
    thetas = [float(t) for t in thetas]
    v = q.projector(AngleInterval(alpha, beta)) @ np.asarray(psi, dtype=float)
    width = beta - alpha
    rhs = width * float(np.linalg.norm(v))
    if not q.indices(AngleInterval(alpha, beta)):
        return DefectReport(F.to_dict(), alpha, beta, thetas, [0.0] * len(thetas), 0.0,
                            [0.0] * len(thetas), 0.0, True)
    FJv = apply_function(q.op, F) @ v
    lhs = []
    for t in thetas:
        Jt = direct_sum_from(q.op, t)
        lhs.append(float(np.linalg.norm(apply_function(Jt, F) @ v - FJv)))
    ratio = [x / rhs if rhs > 0 else 0.0 for x in lhs]
    return DefectReport(F.to_dict(), alpha, beta, thetas, lhs, rhs, ratio, max(ratio), False)


# ------------------------------------------------------------ Riemann–Stieltjes sums

@dataclass(frozen=True)
class Partition:
    """Partition a = x_0 < ... < x_m = b of [a, b) with tags t_j in [x_{j-1}, x_j).

    Uniform partitions are stored implicitly (``m`` cells of width (b-a)/m)
    so that meshes far below any angle gap stay cheap: only cells holding
    atoms are ever touched. ``tag`` is ``"left"``, ``"mid"`` or ``"atom"``
    (the first atom in the cell, left endpoint if empty) for uniform
    partitions.
    """

    a: float
    b: float
    m: int
    tag: str = "left"
    points: tuple[float, ...] | None = None
    tags: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.points is not None:
            pts = self.points
            if len(pts) < 2 or any(y < x for x, y in zip(pts, pts[1:])):
                raise ValueError("partition points must be non-decreasing")
            if self.tags is None or len(self.tags) != len(pts) - 1:
                raise ValueError("need one tag per cell")
            for t, x0, x1 in zip(self.tags, pts, pts[1:]):
                if not (x0 <= t < x1 or (x0 == x1 == t)):
                    raise ValueError(f"tag {t} not in [{x0}, {x1})")
        elif self.m < 1:
            raise ValueError("need at least one cell")

    @classmethod
    def uniform(cls, a: float, b: float, m: int, tag: str = "left") -> "Partition":
        return cls(float(a), float(b), int(m), tag)

    @classmethod
    def explicit(cls, points, tags) -> "Partition":
        points = tuple(float(x) for x in points)
        return cls(points[0], points[-1], len(points) - 1, "explicit", points, tuple(float(t) for t in tags))

    @property
    def mesh(self) -> float:
        if self.points is not None:
            return float(max(y - x for x, y in zip(self.points, self.points[1:])))
        return (self.b - self.a) / self.m

    def cell_of(self, theta: float) -> int | None:
        if not self.a <= theta < self.b:
            return None
        if self.points is not None:
            j = int(np.searchsorted(self.points, theta, side="right")) - 1
            return min(j, self.m - 1)
        h = (self.b - self.a) / self.m
        j = int(math.floor((theta - self.a) / h))
        return min(max(j, 0), self.m - 1)

    def cell(self, j: int) -> tuple[float, float]:
        if self.points is not None:
            return self.points[j], self.points[j + 1]
        h = (self.b - self.a) / self.m
        return self.a + j * h, (self.b if j == self.m - 1 else self.a + (j + 1) * h)

    def tag_of(self, j: int, atom_thetas=()) -> float:
        if self.points is not None:
            return self.tags[j]
        x0, x1 = self.cell(j)
        if self.tag == "left":
            return x0
        if self.tag == "mid":
            return 0.5 * (x0 + x1)
        if self.tag == "atom":
            return min(atom_thetas) if atom_thetas else x0
        raise ValueError(f"unknown tag rule {self.tag!r}")


@dataclass(frozen=True)
class RSResult:
    matrix: np.ndarray
    target: np.ndarray
    defect: float
    mesh: float
    cells_used: int


def rs_integral(q: QMeasure, F: FunctionSpec, partition: Partition,
                singletons=(0.0, HALF_PI)) -> RSResult:
    """sum_j F(J_{t_j}) Q([x_{j-1}, x_j)) over the cells holding atoms.

    Atoms sitting exactly at an angle in ``singletons`` are taken out of the
    partition and contribute F(J_θ) Q({θ}) directly. The defect is the
    operator 2-norm of RS - F(J) Q([a, b)).
    """
    cells: dict[int, list[AngleAtom]] = defaultdict(list)
    single: list[AngleAtom] = []
    for atom in q.atoms:
        if any(atom.theta == s for s in singletons) and partition.a <= atom.theta < partition.b:
            single.append(atom)
            continue
        j = partition.cell_of(atom.theta)
        if j is not None:
            cells[j].append(atom)
    n = q.op.size
    total = np.zeros((n, n), dtype=complex)
    for atom in single:
        P = q.sys.projector(atom.atom_indices)
        total += apply_function(direct_sum_from(q.op, atom.theta), F) @ P
    for j in sorted(cells):
        group = cells[j]
        t = partition.tag_of(j, [g.theta for g in group])
        P = q.sys.projector([i for g in group for i in g.atom_indices])
        total += apply_function(direct_sum_from(q.op, t), F) @ P
    target = apply_function(q.op, F) @ q.projector(AngleInterval(partition.a, partition.b))
    defect = float(np.linalg.norm(total - target, 2))
    return RSResult(total, target, defect, partition.mesh, len(cells) + len(single))


def rs_sweep(q: QMeasure, F: FunctionSpec, a: float = 0.0, b: float = math.pi, m0: int = 2,
             levels: int = 40, tag: str = "left", stop_below: float | None = None):
    """Defect of RS sums over uniform partitions with m0 * 2^k cells.

    Returns a list of dicts with keys mesh, cells, defect, below_gap.
    """
    gap = q.min_gap()
    rows = []
    for k in range(levels):
        part = Partition.uniform(a, b, m0 * 2 ** k, tag)
        res = rs_integral(q, F, part)
        rows.append({"mesh": part.mesh, "cells": part.m, "defect": res.defect,
                     "below_gap": part.mesh < gap})
        if stop_below is not None and part.mesh < gap and res.defect < stop_below:
            break
    return rows


def pure_point_sum(q: QMeasure, F: FunctionSpec) -> np.ndarray:
    """⊕_n F(J_{θ_n}) Q({θ_n})."""
    n = q.op.size
    total = np.zeros((n, n), dtype=complex)
    for atom in q.atoms:
        total += apply_function(direct_sum_from(q.op, atom.theta), F) @ q.sys.projector(atom.atom_indices)
    return total


def pvm_defects(q: QMeasure, B1, B2) -> dict:
    """Norms measuring the projection-valued-measure laws for Q on B1, B2.

    B1, B2 are :class:`AngleInterval` objects.
    """
    J = q.op.matrix()
    P1, P2 = q.projector(B1), q.projector(B2)
    f1, f2 = _selector(B1, q.tol), _selector(B2, q.tol)
    P12 = q.projector(lambda t: f1(t) and f2(t))
    Pu = q.projector(lambda t: f1(t) or f2(t))
    disjoint = not any(f1(a.theta) and f2(a.theta) for a in q.atoms)
    out = {
        "idempotence": float(np.linalg.norm(P1 @ P1 - P1, 2)),
        "self_adjoint": float(np.linalg.norm(P1 - P1.T, 2)),
        "multiplicativity": float(np.linalg.norm(P1 @ P2 - P12, 2)),
        "commutator": max(float(np.linalg.norm(J @ P1 - P1 @ J, 2)),
                          float(np.linalg.norm(J @ P2 - P2 @ J, 2))),
    }
    if disjoint:
        out["additivity"] = float(np.linalg.norm(Pu - P1 - P2, 2))
    return out
