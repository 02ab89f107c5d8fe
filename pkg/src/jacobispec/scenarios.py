"""Seeded model generators shared by the CLI, the tests and the benchmarks."""
from __future__ import annotations

import numpy as np

from .operator_core import CoefficientModel, IndexWindow, TailRule


def random_model(seed: int, n: int = 30, disorder: float = 2.0, hopping_spread: float = 0.3,
                 ) -> CoefficientModel:
    """Explicit coefficients on [-n, n]: b uniform in ±disorder/2, a in [1-s, 1+s].

    Outside the window the free tail (a=1, b=0) takes over.
    """
    rng = np.random.default_rng(seed)
    size = 2 * n + 1
    b = rng.uniform(-0.5 * disorder, 0.5 * disorder, size)
    a = rng.uniform(1.0 - hopping_spread, 1.0 + hopping_spread, size)
    return CoefficientModel(-n, tuple(a.tolist()), tuple(b.tolist()), TailRule("constant", 1.0, 0.0))


def symmetric_model(seed: int | None = None, n: int = 10, disorder: float = 2.0,
                    b_half=None) -> CoefficientModel:
    """a ≡ 1 and b_k = b_{1-k}, explicit on [-n, n+1].

    ``b_half`` gives (b_1, ..., b_{n+1}) directly; otherwise they are drawn
    uniformly from ±disorder/2 with ``seed``.
    """
    if b_half is None:
        rng = np.random.default_rng(seed)
        b_half = rng.uniform(-0.5 * disorder, 0.5 * disorder, n + 1)
    b_half = np.asarray(b_half, dtype=float)
    n = len(b_half) - 1
    b = np.concatenate([b_half[::-1], b_half])      # sites -n..0 mirror 1..n+1
    a = np.ones(2 * n + 2)
    return CoefficientModel(-n, tuple(a.tolist()), tuple(b.tolist()), TailRule("constant", 1.0, 0.0))


def symmetric_window(model: CoefficientModel) -> IndexWindow:
    """The explicit window [-n, n+1], mirror-symmetric about 1/2."""
    lo, hi = model.explicit_range
    return IndexWindow(lo, hi)


def model_window(model: CoefficientModel) -> IndexWindow:
    lo, hi = model.explicit_range
    return IndexWindow(lo, hi)
