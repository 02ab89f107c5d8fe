from __future__ import annotations

import numpy as np
import pytest

from jacobispec.herglotz import ConvergenceError, EpsSchedule, edge_m
from jacobispec.operator_core import IndexWindow, ModelError, build_whole_line, build_window
from jacobispec.resolvent_submatrix import (ConditioningError, block_from_operator, build_block,
                                            corner_oracles, limit_zero_trace,
                                            verify_inverse_structure)
from jacobispec.scenarios import random_model
from jacobispec.spectral_measures import eigendecompose

Z = 0.4 + 0.7j


def test_n_zero_is_diagonal_entry(free):
    blk = build_block(free, 0, Z)
    # free whole-line diagonal resolvent entry: -1/sqrt(4 - z^2) with the Herglotz branch
    expected = -1 / np.sqrt(Z * Z - 4)
    if (expected.imag <= 0):
        expected = -expected
    assert blk.entries.shape == (1, 1)
    assert blk.entries[0, 0] == pytest.approx(expected, abs=1e-11)


def test_block_symmetric():
    blk = build_block(random_model(1, n=8), 3, Z)
    assert blk.symmetry_defect() < 1e-13
    assert blk.sites.tolist() == list(range(-3, 4))


def test_free_block_against_large_dense(free):
    blk = build_block(free, 2, Z)
    op = build_whole_line(free, 600)
    G = np.linalg.inv(op.matrix() - Z * np.eye(op.size))
    pos = [op.window.pos(k) for k in range(-2, 3)]
    np.testing.assert_allclose(blk.entries, G[np.ix_(pos, pos)], atol=1e-11)


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("n", [0, 1, 3])
def test_inverse_structure(seed, n):
    model = random_model(seed, n=8)
    rep = verify_inverse_structure(build_block(model, n, Z), model)
    scale = max(1.0, rep["condition_number"])
    assert rep["off_band_max"] <= 1e-10 * scale
    assert rep["band_deviation_max"] <= 1e-10 * scale
    assert rep["corner_error_minus"] <= 1e-10 * scale
    assert rep["corner_error_plus"] <= 1e-10 * scale
    assert rep["identity_defect"] <= 1e-12 * scale
    # a doubled corner is far from the computed inverse
    assert rep["literal_reading_deviation"] > 1e-3


def test_corner_oracle_direction():
    model = random_model(2, n=6)
    inv_minus, inv_plus = corner_oracles(model, 2, Z)
    assert inv_minus == pytest.approx(1 / edge_m(model, -2, -1, Z, 1024), rel=1e-12)
    assert inv_plus == pytest.approx(1 / edge_m(model, 2, 1, Z, 1024), rel=1e-12)


def test_block_from_finite_operator():
    op = build_whole_line(random_model(0, n=5), 5)
    blk = block_from_operator(op, 2, Z)
    G = np.linalg.inv(op.matrix() - Z * np.eye(op.size))
    np.testing.assert_allclose(blk.entries, G[3:8, 3:8], atol=1e-13)
    with pytest.raises(ModelError):
        block_from_operator(op, 6, Z)


def test_conditioning_error():
    # near an eigenvalue of a small finite operator the block is nearly singular at rank one
    op = build_window(random_model(0, n=2), IndexWindow(-2, 2))
    sys_ = eigendecompose(op)
    blk = block_from_operator(op, 2, sys_.energies[2] + 1e-13j)
    with pytest.raises(ConditioningError):
        verify_inverse_structure(blk, random_model(0, n=2))


def test_invalid_inputs(free):
    with pytest.raises(ValueError):
        build_block(free, 1, 0.3)
    with pytest.raises(ModelError):
        build_block(free, -1, Z)
    with pytest.raises(ConvergenceError):
        build_block(free, 1, 0.3 + 1e-9j, max_depth=256)


def test_depth_doubling_reported(free):
    blk = build_block(free, 1, 0.3 + 0.05j)
    assert blk.depth_change <= 1e-12 * max(1.0, np.abs(blk.entries).max())
    assert blk.outer_depth >= 128


def test_limit_zero_trace_goes_to_zero():
    op = build_whole_line(random_model(3, n=10), 10)
    sys_ = eigendecompose(op)
    E = sys_.energies[7]
    eps, vals = limit_zero_trace(op, E, 2, 1, EpsSchedule(eps_start=1e-2, factor=0.1, count=6))
    assert vals[-1] < 1e-3 * vals[0]
    # linear in ε
    slopes = vals / eps
    assert slopes[-1] == pytest.approx(slopes[-2], rel=0.05)
