"""Shared helpers for the test suite."""

import numpy as np

from hdvarboot import SparsePattern, VarModel, generate_var_model
from hdvarboot.linproc import build_companion, spectral_radius


def random_stationary_model(seed: int, n_max: int = 10, k_max: int = 3,
                            rho_range=(0.3, 0.9)) -> VarModel:
    """Random sparse stationary model with dimensions drawn from the seed."""
    gen = np.random.default_rng(seed)
    n = int(gen.integers(1, n_max + 1))
    k = int(gen.integers(1, k_max + 1))
    kind = gen.choice(["banded", "random_support", "diagonal"])
    budget = int(gen.integers(1, n * k + 1))
    pattern = SparsePattern(kind=str(kind), per_row_nonzeros=budget,
                            magnitude=0.5, decay_across_lags=0.7)
    rho = float(gen.uniform(*rho_range))
    return generate_var_model(n=n, k=k, pattern=pattern, target_rho=rho, seed=seed)


def companion_radius(model: VarModel) -> float:
    return spectral_radius(build_companion(model.a_mats).inner)


def scale_model_to_radius(model: VarModel, target: float) -> VarModel:
    """Uniformly rescale all lag matrices until the companion radius hits target."""
    lo, hi = 0.0, 1.0
    base = companion_radius(model)
    while companion_radius(VarModel([a * hi for a in model.a_mats], model.n, model.k)) < target:
        hi *= 2.0
        if hi > 1e6:
            raise RuntimeError("cannot reach target radius")
    for _ in range(80):
        mid = (lo + hi) / 2.0
        rho = companion_radius(VarModel([a * mid for a in model.a_mats], model.n, model.k))
        if rho < target:
            lo = mid
        else:
            hi = mid
    c = (lo + hi) / 2.0
    return VarModel([a * c for a in model.a_mats], model.n, model.k)
