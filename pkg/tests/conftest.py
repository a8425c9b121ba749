import numpy as np

from holoslow.systems import SF2Spec


def unit_disc(rng, size=None):
    r = np.sqrt(rng.uniform(0, 1, size))
    return r * np.exp(2j * np.pi * rng.uniform(0, 1, size))


def random_sf2(rng, degree=4, alpha=None, beta=None):
    """SF2 system with O_2 remainders of total degree <= ``degree``, coefficients in the unit disc."""
    keys = [(s, l) for s in range(degree + 1) for l in range(degree + 1) if 2 <= s + l <= degree]
    a = {k: complex(unit_disc(rng)) for k in keys}
    b = {k: complex(unit_disc(rng)) for k in keys}
    if alpha is None:
        alpha = complex(unit_disc(rng))
        while abs(alpha) < 0.3:
            alpha = complex(unit_disc(rng))
    if beta is None:
        beta = complex(unit_disc(rng))
    return SF2Spec.from_coeffs(alpha, beta, a, b)
