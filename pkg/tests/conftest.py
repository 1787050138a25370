import itertools
import math

import numpy as np
import pytest


def esp_bruteforce(values, k):
    """Independent oracle: sigma_k as the exactly-rounded sum over all
    k-subsets (fsum of products)."""
    values = list(values)
    if k == 0:
        return 1.0
    return math.fsum(math.prod(c) for c in itertools.combinations(values, k))


def sigma2_doublesum(values):
    """sigma_2 by the brute-force double sum."""
    return esp_bruteforce(values, 2)


def random_orthogonal(rng, dim):
    """Haar-ish orthogonal matrix from a QR factorization with sign fix."""
    a = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def manifold_spectra(n, k_floor, count, seed):
    """Seeded spectra on {sigma_2 = 1, sigma_1 > 0, lam >= -K}."""
    from s2wb.jacobicert import sample_lambda_batch
    return sample_lambda_batch(n, k_floor, count, (seed,))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
