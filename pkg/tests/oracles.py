"""Independent reference implementations used as test oracles.

They follow the model formulas term by term with explicit loops and share
no code with the package beyond its plain value types.
"""

import math

import numpy as np


def naive_subgrid(probe, c):
    """Cell-centred element sampling, rebuilt with explicit loops; returns (x, y, lens) lists."""
    w = probe.pitch - probe.kerf
    h = probe.element_height
    xs, ys, lens = [], [], []
    for l2 in range(probe.sub_ny):
        for l1 in range(probe.sub_nx):
            x = -w / 2 + (l1 + 0.5) * w / probe.sub_nx
            y = -h / 2 + (l2 + 0.5) * h / probe.sub_ny
            xs.append(x)
            ys.append(y)
            lens.append(math.sqrt(y * y + probe.geometric_focus_depth ** 2) / c)
    return xs, ys, lens


def naive_impulse(x, z, probe, c, element, t0, dt, num_samples, K=32):
    """Impulse response at (x, 0, z) on ``t0 + n dt``, in long double.

    Each sub-point contributes ``sinc(fs (t - tau_j)) cos(phi_j) / d_j`` on the
    ``2K + 1`` samples nearest its arrival, times ``dA / (2 pi)``.
    """
    ld = np.longdouble
    xs, ys, lens = naive_subgrid(probe, c)
    cx = (element + 0.5) * probe.pitch
    area = (probe.pitch - probe.kerf) * probe.element_height / (probe.sub_nx * probe.sub_ny)
    h = np.zeros(num_samples, dtype=ld)
    pi = ld(np.pi)
    for j in range(len(xs)):
        d = np.sqrt(ld(x - cx - xs[j]) ** 2 + ld(ys[j]) ** 2 + ld(z) ** 2)
        tau = d / ld(c) - ld(lens[j])
        u = (tau - ld(t0)) / ld(dt)
        k = int(np.rint(u))
        for n in range(k - K, k + K + 1):
            arg = ld(n) - u
            s = ld(1) if arg == 0 else np.sin(pi * arg) / (pi * arg)
            h[n] += s * (ld(z) / d) / d
    return h * ld(area) / (2 * pi)


def naive_dft(row, t0, dt, freqs):
    """``sum_n row[n] exp(-2 pi i f (t0 + n dt)) dt`` with an explicit loop."""
    out = np.zeros(len(freqs), dtype=complex)
    for i, f in enumerate(freqs):
        acc = 0j
        for n, v in enumerate(row):
            acc += v * np.exp(-2j * np.pi * f * (t0 + n * dt))
        out[i] = acc * dt
    return out


def time_domain_energy(h_rows, starts, dt, pulse_samples, delays):
    """Exact energy of ``sum_m (I * h_m)(t - D_m)`` for band-limited continuous signals.

    ``h_rows[m]`` is sampled from ``starts[m]``. With ``y_m = dt (I * h_m)`` on the
    sample lattice, the continuous-time energy of the delayed sum is
    ``dt sum_{m, m'} sum_l r_{mm'}[l] sinc(l + (starts_m - starts_m' + D_m - D_m') / dt)``,
    where ``r`` is the discrete cross-correlation (shift, sum, square, integrate).
    """
    ys = []
    for h, a in zip(h_rows, starts):
        nz = np.nonzero(h)[0]
        lo, hi = nz[0], nz[-1] + 1
        ys.append((a + lo * dt, np.convolve(pulse_samples, h[lo:hi]) * dt))
    E = 0.0
    for (a1, y1), d1 in zip(ys, delays):
        for (a2, y2), d2 in zip(ys, delays):
            r = np.correlate(y1, y2, "full")
            lags = np.arange(-(len(y2) - 1), len(y1))
            E += dt * np.sum(r * np.sinc(lags + (a1 - a2 + d1 - d2) / dt))
    return E


def cosine_expansion_power(G, delays, f0):
    """Symmetric-aperture expansion of the narrowband power.

    ``sum_m |G_m|^2 + 2 sum_{m > n} [Re(G_m conj G_n) cos(delta) + Im(G_m conj G_n) sin(delta)]``
    with ``delta = 2 pi f0 (D_m - D_n)``.
    """
    G = np.asarray(G)
    P = np.zeros(G.shape[:-1])
    M = G.shape[-1]
    for m in range(M):
        P += np.abs(G[..., m]) ** 2
        for n in range(m):
            c = G[..., m] * np.conj(G[..., n])
            delta = 2 * np.pi * f0 * (delays[m] - delays[n])
            P += 2 * (c.real * np.cos(delta) + c.imag * np.sin(delta))
    return P


def alpha_scan(a, b, lo=1e-3, hi=1e3, n=20001, refine=4):
    """Grid search for ``min_alpha mean((a/max a - alpha b/max b)^2)``; returns (D, alpha)."""
    a = np.asarray(a, float).ravel() / np.max(a)
    b = np.asarray(b, float).ravel() / np.max(b)
    grid = np.geomspace(lo, hi, n)
    for _ in range(refine + 1):
        cost = np.array([np.mean((a - g * b) ** 2) for g in grid])
        i = int(np.argmin(cost))
        best = float(cost[i]), float(grid[i])
        grid = np.linspace(grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)], 201)
    return best


def covariance_eig(X, k):
    """Top-k eigenpairs of the sample covariance via a dense symmetric eigensolver."""
    X = np.asarray(X, float)
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / max(X.shape[0] - 1, 1)
    w, V = np.linalg.eigh(C)
    order = np.argsort(w)[::-1][:k]
    return w[order], V[:, order].T, Xc @ V[:, order]


def ks_uniform(samples, lo, hi):
    """Kolmogorov-Smirnov statistic of ``samples`` against U(lo, hi)."""
    x = np.sort((np.asarray(samples, float) - lo) / (hi - lo))
    n = x.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - x), np.max(x - (i - 1) / n)))
