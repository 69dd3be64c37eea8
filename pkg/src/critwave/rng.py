"""Reproducible per-sample random streams.

Each sample gets a 64-bit seed derived from (master_seed, index), and its
coefficients are drawn from a Philox counter-based generator keyed by that
seed, so results do not depend on how samples are spread over workers.
"""
import numpy as np


def sample_seed(master_seed, index):
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def generator(seed):
    return np.random.Generator(np.random.Philox(key=int(seed)))


def gaussian_coefficients(seed, n):
    """a_1..a_n with Re, Im iid standard normal, l ascending, real part first."""
    z = generator(seed).standard_normal(2 * n).reshape(n, 2)
    return z[:, 0] + 1j * z[:, 1]
