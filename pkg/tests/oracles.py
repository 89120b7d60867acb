"""Numerical-integration oracle for the F distribution upper tail."""
import math

import numpy as np
from scipy import integrate
from scipy.special import gammaln


def f_tail_by_quadrature(f, d1, d2):
    log_norm = (gammaln((d1 + d2) / 2) - gammaln(d1 / 2) - gammaln(d2 / 2)
                + (d1 / 2) * math.log(d1 / d2))

    def density(x):
        return math.exp(log_norm + (d1 / 2 - 1) * math.log(x) - ((d1 + d2) / 2) * math.log1p(d1 * x / d2))

    head, _ = integrate.quad(density, 0.0, f, epsabs=1e-13, epsrel=1e-12, limit=200)
    if f > 1.0:
        tail, _ = integrate.quad(density, f, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
        return tail
    return 1.0 - head
