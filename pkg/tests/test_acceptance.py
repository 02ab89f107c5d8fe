"""Acceptance criteria at their stated tolerances, one PASS/FAIL line each."""
from __future__ import annotations

import math
import time

import numpy as np

from jacobispec.decomposition import (AngleInterval, FunctionSpec, Partition, build_q, pvm_defects,
                                      rs_integral, rs_sweep, splitting_defect)
from jacobispec.expansion import gamma_estimate, reconstruct_singular, subordinate_amplitude
from jacobispec.herglotz import (EpsSchedule, extrapolate_zero, half_line_m, perturbation_formula,
                                 resolvent_columns)
from jacobispec.operator_core import HALF_PI, CoefficientModel, build_whole_line, build_window
from jacobispec.recurrence import detect_subordinate, solve, wronskian
from jacobispec.resolvent_submatrix import build_block, verify_inverse_structure
from jacobispec.scenarios import random_model, symmetric_model, symmetric_window
from jacobispec.spectral_measures import boundary_measure, eigendecompose, joint_measure

FUNCTIONS = (FunctionSpec.power(1), FunctionSpec.power(2), FunctionSpec.power(3),
             FunctionSpec.unitary(1.0), FunctionSpec.resolvent(1j))


def _system(seed, n):
    return eigendecompose(build_whole_line(random_model(seed, n=n), n))


def _well_conditioned_qs(count, n=10, margin=0.01):
    """Random models whose atom angles all stay ``margin`` away from 0 and π/2 (seeds in order)."""
    out, seed = [], 0
    while len(out) < count:
        q = build_q(_system(seed, n))
        th = q.angles
        if np.all(np.minimum.reduce([th, np.abs(th - HALF_PI), math.pi - th]) >= margin):
            out.append((seed, q))
        seed += 1
    return out


def test_criterion_01_eigenfunction_expansion(acceptance):
    t0 = time.perf_counter()
    identity_err = projector_err = 0.0
    for seed in range(20):
        sys_ = _system(seed, 30)
        eye = np.eye(sys_.size)
        rec, excluded = reconstruct_singular(sys_, range(sys_.size), eye)
        assert excluded == []
        identity_err = max(identity_err, float(np.max(np.abs(rec - eye))))
        for i in range(sys_.size):
            part, _ = reconstruct_singular(sys_, [i], eye)
            projector_err = max(projector_err, float(np.max(np.abs(part - sys_.projector([i])))))
    elapsed = time.perf_counter() - t0
    ok = identity_err < 1e-10 and projector_err < 1e-10 and elapsed < 10.0
    acceptance(1, ok, f"identity {identity_err:.2e}, per-atom {projector_err:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_02_gamma_factorization(acceptance):
    sched = EpsSchedule.down_to(1e-7)
    worst = {"sv_ratio": 0.0, "asym": 0.0, "trace": 0.0, "factor": 0.0, "entries": 0.0}
    atoms = 0
    converged = True
    for seed in range(10):
        sys_ = _system(seed, 10)
        for i in range(sys_.size):
            amp = subordinate_amplitude(sys_, i)
            g = gamma_estimate(sys_, sys_.energies[i], sched=sched)
            converged &= g.converged
            sv = g.singular_values()
            i0, i1 = np.searchsorted(g.sites, 0), np.searchsorted(g.sites, 1)
            scale = float(np.abs(g.entries).max())
            worst["sv_ratio"] = max(worst["sv_ratio"], sv[1] / sv[0])
            worst["asym"] = max(worst["asym"], g.asymmetry / scale)
            worst["trace"] = max(worst["trace"], abs(g.entries[i0, i0] + g.entries[i1, i1] - 1))
            worst["factor"] = max(worst["factor"], float(np.max(np.abs(g.factor() - amp.values))))
            worst["entries"] = max(worst["entries"], float(np.max(np.abs(
                g.entries - np.outer(amp.values, amp.values)))) / scale)
            atoms += 1
    ok = (converged and worst["sv_ratio"] < 1e-6 and worst["asym"] < 1e-6 and worst["trace"] < 1e-6
          and worst["factor"] < 1e-6 and worst["entries"] < 1e-6)
    acceptance(2, ok, f"{atoms} atoms, " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_03_perturbation_formula(acceptance):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        model = random_model(int(rng.integers(0, 10_000)), n=int(rng.integers(2, 20)))
        theta = float(rng.uniform(0, math.pi))
        while abs(theta - HALF_PI) < 1e-6:
            theta = float(rng.uniform(0, math.pi))
        z = complex(rng.uniform(-3, 3), rng.uniform(0.05, 2))
        direct = half_line_m(model, "+", theta, z)
        formula = perturbation_formula(half_line_m(model, "+", 0.0, z), theta)
        worst = max(worst, abs(direct - formula))
    ok = worst < 1e-8
    acceptance(3, ok, f"100 triples, max |direct - formula| {worst:.2e}")
    assert ok


def test_criterion_04_resolvent_submatrix(acceptance):
    rng = np.random.default_rng(4)
    worst = {"off_band": 0.0, "band": 0.0, "corner": 0.0}
    for seed in range(20):
        model = random_model(seed, n=10)
        for n in (1, 2, 3):
            z = complex(rng.uniform(-3, 3), rng.uniform(0.1, 1.0))
            rep = verify_inverse_structure(build_block(model, n, z), model)
            worst["off_band"] = max(worst["off_band"], rep["off_band_max"])
            worst["band"] = max(worst["band"], rep["band_deviation_max"])
            worst["corner"] = max(worst["corner"], rep["corner_error_minus"], rep["corner_error_plus"])
    ok = worst["off_band"] < 1e-7 and worst["band"] < 1e-8 and worst["corner"] < 1e-6
    acceptance(4, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_05_q_is_pvm(acceptance):
    rng = np.random.default_rng(5)
    worst = 0.0
    for seed in range(10):
        q = build_q(_system(seed, 10))
        for _ in range(5):
            a1, b1 = np.sort(rng.uniform(0, math.pi, 2))
            a2, b2 = np.sort(rng.uniform(0, math.pi, 2))
            worst = max(worst, *pvm_defects(q, AngleInterval(a1, b1), AngleInterval(a2, b2)).values())
            cut = float(rng.uniform(0, math.pi))
            d = pvm_defects(q, AngleInterval(0.0, cut), AngleInterval(cut, math.pi))
            worst = max(worst, *d.values())
    ok = worst < 1e-10
    acceptance(5, ok, f"max PVM defect {worst:.2e}")
    assert ok


def test_criterion_06_splitting_inequality(acceptance):
    worst_spread = 0.0
    singleton = 0.0
    for seed, q in _well_conditioned_qs(3):
        psi = np.random.default_rng(seed).normal(size=q.op.size)
        atom = min((a for a in q.atoms if 0.25 < a.theta < HALF_PI - 0.25 or
                    HALF_PI + 0.25 < a.theta < math.pi - 0.25), key=lambda a: abs(a.theta - 1.0))
        th = atom.theta
        for F in FUNCTIONS:
            gammas = []
            for k in range(5):
                w = 0.2 / 2 ** k
                rep = splitting_defect(q, F, th - 0.3 * w, th + 0.7 * w, psi)
                gammas.append(rep.gamma)
            worst_spread = max(worst_spread, max(gammas) / min(gammas))
        rep = splitting_defect(q, FunctionSpec.power(1), th, th + 1e-12, psi, thetas=[th])
        singleton = max(singleton, rep.lhs[0])
    ok = worst_spread <= 10.0 and singleton < 1e-12
    acceptance(6, ok, f"max/min gamma {worst_spread:.3f}, singleton lhs {singleton:.1e}")
    assert ok


def test_criterion_07_rs_integral(acceptance):
    atom_tag = 0.0
    final_left = 0.0
    worst_rise = 0.0
    rows_checked = 0
    for _, q in _well_conditioned_qs(3):
        m = 2 ** int(math.ceil(math.log2(math.pi / q.min_gap()) + 1))
        for F in FUNCTIONS:
            res = rs_integral(q, F, Partition.uniform(0.0, math.pi, m, "atom"))
            atom_tag = max(atom_tag, res.defect)
            rows = [r for r in rs_sweep(q, F, levels=52) if r["below_gap"]]
            defects = [r["defect"] for r in rows]
            rows_checked += len(rows)
            worst_rise = max(worst_rise, max(b - a for a, b in zip(defects, defects[1:])))
            final_left = max(final_left, defects[-1])
    # non-increasing up to an absolute rounding slack of 1e-12
    ok = atom_tag < 1e-10 and final_left < 1e-10 and worst_rise <= 1e-12
    acceptance(7, ok, f"atom-tag {atom_tag:.1e}, left-tag final {final_left:.1e}, "
                      f"max rise {worst_rise:.1e} over {rows_checked} rows")
    assert ok


def test_criterion_08_symmetric_potential(acceptance):
    angle_err = proj_err = 0.0
    for seed in range(5):
        model = symmetric_model(seed, n=10)
        op = build_window(model, symmetric_window(model))
        q = build_q(eigendecompose(op))
        for a in q.atoms:
            angle_err = max(angle_err, min(abs(a.theta - math.pi / 4), abs(a.theta - 3 * math.pi / 4)))
        R = np.fliplr(np.eye(op.size))
        anti, sym = 0.5 * (np.eye(op.size) - R), 0.5 * (np.eye(op.size) + R)
        proj_err = max(proj_err,
                       float(np.linalg.norm(q.projector(AngleInterval(0.0, HALF_PI)) - anti, 2)),
                       float(np.linalg.norm(q.projector(AngleInterval(HALF_PI, math.pi)) - sym, 2)))
    ok = angle_err < 1e-8 and proj_err < 1e-8
    acceptance(8, ok, f"angle error {angle_err:.1e}, projector distance {proj_err:.1e}")
    assert ok


def test_criterion_09_subordinacy_boundary_value(acceptance):
    free = CoefficientModel.free()
    v = detect_subordinate(free, "+", 3.0)
    cot = 1.0 / math.tan(v.theta)
    eps = EpsSchedule(eps_start=1e-2, factor=0.1, count=6).eps
    re_m = np.array([half_line_m(free, "+", 0.0, 3.0 + 1j * e).real for e in eps])
    trace_err = float(np.max(np.abs(cot - re_m)))
    limit_err = abs(cot - extrapolate_zero(eps, re_m).real)
    v0 = detect_subordinate(free, "+", 0.0)
    ok = v.status == "subordinate" and trace_err < 1e-3 and limit_err < 1e-3 \
        and v0.status == "none_detected"
    acceptance(9, ok, f"E=3 {v.status}, |cot - Re m0| trace {trace_err:.1e} limit {limit_err:.1e}; "
                      f"E=0 {v0.status}")
    assert ok


def test_criterion_10_herglotz_invariants(acceptance):
    rng = np.random.default_rng(10)
    violations = {"im_M": 0, "resolvent_bound": 0, "wronskian": 0, "cauchy_schwarz": 0}
    for _ in range(1000):
        n = int(rng.integers(3, 12))
        model = random_model(int(rng.integers(0, 100_000)), n=n)
        z = complex(rng.uniform(-4, 4), 10 ** rng.uniform(-3, 1))
        op = build_whole_line(model, n)
        p0, p1 = op.window.pos(0), op.window.pos(1)
        G = resolvent_columns(op, z, [0, 1])
        if not (G[p0, 0] + G[p1, 1]).imag > 0:
            violations["im_M"] += 1
        k, j = (int(x) for x in rng.integers(-n, n + 1, 2))
        Gkj = resolvent_columns(op, z, [j])[op.window.pos(k), 0]
        if abs(Gkj) > (1 + 1e-12) / z.imag:
            violations["resolvent_bound"] += 1
        E = float(rng.uniform(-3, 3))
        side = "+" if rng.random() < 0.5 else "-"
        u = solve(model, E, side, *rng.normal(size=2), 2 * n + 10)
        w = solve(model, E, side, *rng.normal(size=2), 2 * n + 10)
        W = wronskian(model, u, w)
        # rounding in W(n) is relative to the size of the two products, not to W itself
        a_n = model.a_at(u.sites[:-1] if side == "+" else u.sites[1:])
        scale = np.max(np.abs(a_n * u.values[1:] * w.values[:-1]) + np.abs(a_n * u.values[:-1] * w.values[1:]))
        if np.max(np.abs(W - W[0])) > 1e-10 * scale:
            violations["wronskian"] += 1
        sys_ = eigendecompose(op)
        mu = boundary_measure(sys_)
        a, b = (int(x) for x in rng.integers(0, 2, 2))
        mab = joint_measure(sys_, a, b)
        for E_atom, wt in mab.atoms():
            if abs(wt) > mu.weight_at(E_atom) * (1 + 1e-12) + 1e-15:
                violations["cauchy_schwarz"] += 1
                break
    ok = sum(violations.values()) == 0
    acceptance(10, ok, "1000 trials, violations " + ", ".join(f"{k} {v}" for k, v in violations.items()))
    assert ok
