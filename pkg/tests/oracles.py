"""Independent reference implementations used only by the tests."""

import math

import numpy as np
from scipy import integrate


def mgd_quadrature(deriv, T):
    """sqrt((1/T) * integral (x'(t) - c)^2 dt) with c the mean slope, by adaptive quadrature."""
    c = integrate.quad(deriv, 0.0, T, epsabs=1e-12, epsrel=1e-12, limit=500)[0] / T
    sq = integrate.quad(lambda t: (deriv(t) - c) ** 2, 0.0, T, epsabs=1e-12, epsrel=1e-12,
                        limit=500)[0]
    return math.sqrt(sq / T)


def popstd(xs):
    xs = list(xs)
    m = sum(xs) / len(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / len(xs))


def mpgd_loops(values, step, total):
    """Point-wise population std across series of divided differences, time-averaged."""
    N, M = len(values), len(values[0])
    acc = 0.0
    for m in range(1, M):
        d = [(values[n][m] - values[n][m - 1]) / step for n in range(N)]
        acc += popstd(d)
    return step / total * acc


def mgd_loops(series, step):
    return popstd([(b - a) / step for a, b in zip(series, series[1:])])


def jgd_loops(values3, step=1.0):
    """Per-channel JGD of an N x M x C nested list, with standardization."""
    N, M, C = len(values3), len(values3[0]), len(values3[0][0])
    total = step * (M - 1)
    out = []
    for c in range(C):
        flat = [values3[n][m][c] for n in range(N) for m in range(M)]
        mu, sd = sum(flat) / len(flat), popstd(flat)
        z = [[(values3[n][m][c] - mu) / sd for m in range(M)] for n in range(N)]
        mean_mgd = sum(mgd_loops(z[n], step) for n in range(N)) / N
        out.append(mpgd_loops(z, step, total) * mean_mgd)
    return out


def lin_mgd_closed_form(a, T=1.0):
    """MGD of e^{at} on [0, T]: sqrt(a (e^{2aT} - 1) / (2T) - ((e^{aT} - 1) / T)^2)."""
    return math.sqrt(a * math.expm1(2 * a * T) / (2 * T) - (math.expm1(a * T) / T) ** 2)


def spearman_loops(x, y):
    def ranks(v):
        order = sorted(range(len(v)), key=lambda i: v[i])
        r = [0.0] * len(v)
        i = 0
        while i < len(v):
            j = i
            while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
                j += 1
            for k in range(i, j + 1):
                r[order[k]] = (i + j) / 2 + 1
            i = j + 1
        return r

    rx, ry = ranks(x), ranks(y)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    return cov / math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))


def np_grid(T, steps):
    return np.linspace(0.0, T, steps + 1)
