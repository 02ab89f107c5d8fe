from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jacobispec.decomposition import (AngleInterval, FunctionSpec, Partition, apply_function,
                                      build_q, pure_point_sum, pvm_defects,
                                      resolvent_identity_defect, rs_integral, rs_sweep,
                                      splitting_defect, theta_of_energy)
from jacobispec.operator_core import (HALF_PI, IndexWindow, build_whole_line, build_window,
                                      direct_sum_from)
from jacobispec.scenarios import random_model, symmetric_model, symmetric_window
from jacobispec.spectral_measures import eigendecompose


def _q(seed, n=10):
    return build_q(eigendecompose(build_whole_line(random_model(seed, n=n), n)))


@pytest.fixture(scope="module")
def q0():
    return _q(0)


# ------------------------------------------------------------------ angles

@pytest.mark.parametrize("pair, theta", [
    ((0.0, 1.0), 0.0),
    ((1.0, 0.0), HALF_PI),
    ((-1.0, 0.0), HALF_PI),
    ((1.0, -1.0), math.pi / 4),
    ((1.0, 1.0), 3 * math.pi / 4),
    ((0.0, -2.0), 0.0),
])
def test_theta_examples(pair, theta):
    assert theta_of_energy(pair) == pytest.approx(theta, abs=1e-15)


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_theta_solves_boundary_condition(u0, u1):
    if math.hypot(u0, u1) < 1e-6:
        return
    th = theta_of_energy((u0, u1))
    assert 0.0 <= th < math.pi
    assert abs(u0 * math.cos(th) + u1 * math.sin(th)) <= 1e-12 * math.hypot(u0, u1)
    assert theta_of_energy((-u0, -u1)) == pytest.approx(th, abs=1e-12)


def test_theta_zero_pair():
    with pytest.raises(ValueError):
        theta_of_energy((0.0, 0.0))


# ------------------------------------------------------------------ Q measure

def test_full_q_is_identity(q0):
    assert q0.excluded == []
    np.testing.assert_allclose(q0.projector(), np.eye(q0.op.size), atol=1e-12)
    np.testing.assert_allclose(q0.projector(AngleInterval(0, math.pi)), np.eye(q0.op.size), atol=1e-12)


def test_q_additivity(q0):
    cut = float(np.median(q0.angles))
    P = q0.projector(AngleInterval(0, cut)) + q0.projector(AngleInterval(cut, math.pi))
    np.testing.assert_allclose(P, np.eye(q0.op.size), atol=1e-12)


def test_pvm_laws(q0):
    d = pvm_defects(q0, AngleInterval(0.2, 1.9), AngleInterval(1.0, 2.8))
    assert max(d.values()) < 1e-12
    d = pvm_defects(q0, AngleInterval(0.0, 1.0), AngleInterval(1.0, math.pi))
    assert d["additivity"] < 1e-12


def test_q_point_sets_and_predicates(q0):
    th = q0.atoms[0].theta
    np.testing.assert_allclose(q0.projector([th]), q0.sys.projector(q0.atoms[0].atom_indices))
    assert q0.indices(lambda t: False) == []


def test_symmetric_model_angles():
    m = symmetric_model(seed=4, n=6)
    op = build_window(m, symmetric_window(m))
    q = build_q(eigendecompose(op))
    assert {round(a.theta, 9) for a in q.atoms} <= {round(math.pi / 4, 9), round(3 * math.pi / 4, 9)}
    # reflection k -> 1 - k
    R = np.fliplr(np.eye(op.size))
    sym = 0.5 * (np.eye(op.size) + R)
    anti = 0.5 * (np.eye(op.size) - R)
    np.testing.assert_allclose(q.projector([math.pi / 4]), anti, atol=1e-12)
    np.testing.assert_allclose(q.projector([3 * math.pi / 4]), sym, atol=1e-12)


def test_to_dict_reports_both_derivative_readings(q0):
    rows = q0.to_dict()["atoms"]
    for r in rows:
        assert r["dmu00_dmu"] == pytest.approx(r["sin2_theta"], abs=1e-12)


# ------------------------------------------------------------------ functions

def test_function_spec_validation():
    with pytest.raises(ValueError):
        FunctionSpec.power(0)
    with pytest.raises(ValueError):
        FunctionSpec.resolvent(1.0)
    with pytest.raises(ValueError):
        FunctionSpec("sine")
    with pytest.raises(ValueError):
        FunctionSpec.unitary(math.inf)
    for F in (FunctionSpec.power(3), FunctionSpec.unitary(0.5), FunctionSpec.resolvent(0.2 + 1j)):
        assert FunctionSpec.from_dict(F.to_dict()) == F


def test_apply_function_examples(free):
    op = build_whole_line(free, 2)
    J = op.matrix()
    np.testing.assert_allclose(apply_function(op, FunctionSpec.power(2)), J @ J)
    U = apply_function(op, FunctionSpec.unitary(1.3))
    np.testing.assert_allclose(U @ U.conj().T, np.eye(op.size), atol=1e-13)
    np.testing.assert_allclose(apply_function(op, FunctionSpec.unitary(0.0)), np.eye(op.size), atol=1e-14)
    z = 0.3 + 0.5j
    R = apply_function(op, FunctionSpec.resolvent(z))
    np.testing.assert_allclose(R @ (J - z * np.eye(op.size)), np.eye(op.size), atol=1e-13)


def test_resolvent_identity(q0):
    J = q0.op.matrix()
    Jt = direct_sum_from(q0.op, 0.7).matrix()
    assert resolvent_identity_defect(J, Jt, 0.4 + 0.3j) <= 1e-10


# ------------------------------------------------------------------ splitting defect

def test_splitting_vacuous(q0):
    th = np.sort(q0.angles)
    lo = next(t for t in th if 0.05 < t < 1.4)
    rep = splitting_defect(q0, FunctionSpec.power(1), lo + 1e-6, lo + 2e-6, np.ones(q0.op.size))
    assert rep.vacuous and rep.gamma == 0.0


def test_splitting_exact_at_atom_angle(q0):
    a = next(a for a in q0.atoms if 0.05 < a.theta < 1.5)
    psi = np.random.default_rng(1).normal(size=q0.op.size)
    rep = splitting_defect(q0, FunctionSpec.power(2), a.theta, a.theta + 1e-12, psi,
                           thetas=[a.theta])
    assert rep.lhs[0] <= 1e-12 * max(1.0, np.linalg.norm(psi))


@pytest.mark.parametrize("F", [FunctionSpec.power(1), FunctionSpec.power(2),
                               FunctionSpec.unitary(1.0), FunctionSpec.resolvent(0.1 + 0.5j)])
def test_splitting_bounded(q0, F):
    psi = np.random.default_rng(2).normal(size=q0.op.size)
    a = next(a for a in q0.atoms if 0.3 < a.theta < 1.2)
    ratios = []
    for k in range(5):
        w = 0.2 / 2 ** k
        rep = splitting_defect(q0, F, a.theta - 0.3 * w, a.theta + 0.7 * w, psi)
        assert not rep.vacuous
        ratios.append(rep.gamma)
    # once the interval isolates one atom angle, γ settles to a constant
    tail = ratios[2:]
    assert np.all(np.isfinite(ratios))
    assert max(tail) <= 1.1 * min(tail)


def test_splitting_interval_validation(q0):
    psi = np.ones(q0.op.size)
    with pytest.raises(ValueError):
        splitting_defect(q0, FunctionSpec.power(1), 1.0, 2.0, psi)
    with pytest.raises(ValueError):
        splitting_defect(q0, FunctionSpec.power(1), 0.5, 0.4, psi)
    with pytest.raises(ValueError):
        splitting_defect(q0, FunctionSpec.power(1), 0.0, 0.4, psi)
    splitting_defect(q0, FunctionSpec.power(1), 1.0, 2.0, psi, strict=False)


def test_unitary_gamma_grows_with_time(q0):
    psi = np.random.default_rng(3).normal(size=q0.op.size)
    a = next(a for a in q0.atoms if 0.3 < a.theta < 1.2)
    g = [splitting_defect(q0, FunctionSpec.unitary(t), a.theta - 0.01, a.theta + 0.02, psi).gamma
         for t in (0.5, 1.0, 2.0)]
    assert g[0] < g[1] < g[2]


# ------------------------------------------------------------------ partitions and RS sums

def test_partition_validation():
    with pytest.raises(ValueError):
        Partition.explicit([0.0, 1.0, 0.5], [0.0, 0.7])
    with pytest.raises(ValueError):
        Partition.explicit([0.0, 1.0], [1.0])
    with pytest.raises(ValueError):
        Partition.explicit([0.0, 1.0], [])
    with pytest.raises(ValueError):
        Partition.uniform(0, 1, 0)
    p = Partition.uniform(0, math.pi, 4)
    assert p.mesh == pytest.approx(math.pi / 4)
    assert p.cell_of(math.pi) is None and p.cell_of(0.0) == 0
    assert p.tag_of(1) == pytest.approx(math.pi / 4)
    assert Partition.uniform(0, 1, 2, "mid").tag_of(0) == 0.25


def test_rs_with_atom_tags_is_exact(q0):
    for F in (FunctionSpec.power(1), FunctionSpec.power(3), FunctionSpec.unitary(1.0)):
        res = rs_integral(q0, F, Partition.uniform(0, math.pi, 2 ** 20, "atom"))
        assert res.defect <= 1e-10


def test_pure_point_sum_matches(q0):
    F = FunctionSpec.power(2)
    target = apply_function(q0.op, F)
    np.testing.assert_allclose(pure_point_sum(q0, F), target, atol=1e-10)


def test_endpoint_singletons_free_zero():
    # reflection about site 0: odd eigenvectors vanish at 0, so θ = 0
    from jacobispec.operator_core import CoefficientModel, TailRule

    free = CoefficientModel(0, (), (), TailRule("constant", 1.0, 0.0))
    q = build_q(eigendecompose(build_whole_line(free, 5)))
    assert any(a.theta == 0.0 for a in q.atoms)
    for F in (FunctionSpec.power(1), FunctionSpec.power(2)):
        res = rs_integral(q, F, Partition.uniform(0, math.pi, 2 ** 30, "atom"))
        assert res.defect <= 1e-10


def test_endpoint_singletons_half_pi():
    # window [-2, 4] is symmetric about site 1, odd eigenvectors vanish at 1, so θ = π/2
    from jacobispec.operator_core import CoefficientModel, TailRule

    free = CoefficientModel(0, (), (), TailRule("constant", 1.0, 0.0))
    q = build_q(eigendecompose(build_window(free, IndexWindow(-2, 4))))
    assert any(a.theta == HALF_PI for a in q.atoms)
    res = rs_integral(q, FunctionSpec.power(2), Partition.uniform(0, math.pi, 2 ** 30, "atom"))
    assert res.defect <= 1e-10


def test_rs_sweep_decreases():
    q = _q(0)
    rows = rs_sweep(q, FunctionSpec.power(1), levels=40)
    defects = [r["defect"] for r in rows]
    assert defects[-1] < 1e-8 * defects[0]
    for d0, d1 in zip(defects, defects[1:]):
        assert d1 <= d0 + 1e-12
    assert rows[-1]["below_gap"]
