"""Hot numeric kernels, compiled with numba when the backend allows.

Both implementations of each kernel are kept side by side: an @njit
scalar-loop version and a chunked-numpy fallback.  Dispatch happens once
at import through ``backend.USE_NUMBA`` (env CAUSALFOCK_BACKEND).  Fixed
summation order per path keeps results bit-reproducible.

The dominant workload is the double-momentum chain quadrature: for every
pair of grid points it evaluates the dispersion integral of the loop
insertion at the pair's invariant mass (a Gauss sum over spectral
nodes), the spinor bilinear, the Gaussian test-function transform, and
the regularized propagator power, accumulating one complex sum per
epsilon.
"""

import numpy as np

from .backend import USE_NUMBA, njit


@njit(cache=True)
def _chain_sum_loops(e1, p1, w1, x1, e2, p2, w2, u2, s1, s2, kins,
                     eps_arr, s_nodes, g_wts, pi_pref, pi_alpha,
                     norm_poly, phi_sig2):
    nres = eps_arr.shape[0]
    out = np.zeros(nres, dtype=np.complex128)
    n_nodes = s_nodes.shape[0]
    for i in range(e1.shape[0]):
        for j in range(e2.shape[0]):
            p0 = s1 * e1[i] + s2 * e2[j]
            pvx = s1 * p1[i, 0] + s2 * p2[j, 0]
            pvy = s1 * p1[i, 1] + s2 * p2[j, 1]
            pvz = s1 * p1[i, 2] + s2 * p2[j, 2]
            r2 = pvx * pvx + pvy * pvy + pvz * pvz
            ups = p0 * p0 - r2
            # dispersion integral of the insertion at this invariant
            acc = 0.0
            for n in range(n_nodes):
                acc += g_wts[n] / (ups - s_nodes[n])
            pival = pi_pref * ups ** pi_alpha * acc
            for c in range(norm_poly.shape[0]):
                pival += norm_poly[c] * ups ** c
            spin = 0.0 + 0.0j
            for c in range(4):
                spin += x1[i, c] * u2[j, c]
            phit = np.exp(-(p0 * p0 + r2) / (2.0 * phi_sig2))
            g = w1[i] * w2[j] * spin * phit
            if kins > 0:
                pk = pival
                for _ in range(kins - 1):
                    pk *= pival
                g = g * pk
            for e in range(nres):
                den = ups + 1j * eps_arr[e] * p0
                dk = den
                for _ in range(kins):
                    dk *= den
                out[e] += g / dk
    return out


def _chain_sum_numpy(e1, p1, w1, x1, e2, p2, w2, u2, s1, s2, kins,
                     eps_arr, s_nodes, g_wts, pi_pref, pi_alpha,
                     norm_poly, phi_sig2, chunk=512):
    out = np.zeros(len(eps_arr), dtype=complex)
    for a in range(0, len(e1), chunk):
        b = min(a + chunk, len(e1))
        p0 = s1 * e1[a:b, None] + s2 * e2[None, :]
        pv = s1 * p1[a:b, None, :] + s2 * p2[None, :, :]
        r2 = np.sum(pv * pv, axis=2)
        ups = p0 * p0 - r2
        flat = ups.reshape(-1)
        integral = (1.0 / (flat[:, None] - s_nodes[None, :])) @ g_wts
        pival = pi_pref * flat ** pi_alpha * integral
        for c in range(len(norm_poly)):
            pival = pival + norm_poly[c] * flat ** c
        pival = pival.reshape(ups.shape)
        spin = x1[a:b] @ u2.T
        phit = np.exp(-(p0 * p0 + r2) / (2.0 * phi_sig2))
        g = (w1[a:b, None] * w2[None, :]) * spin * phit
        if kins > 0:
            g = g * pival ** kins
        for e, eps in enumerate(eps_arr):
            out[e] += np.sum(g / (ups + 1j * eps * p0) ** (kins + 1))
    return out


def chain_sum(*args, **kwargs):
    if USE_NUMBA:
        return _chain_sum_loops(*args)
    return _chain_sum_numpy(*args, **kwargs)


@njit(cache=True)
def _dispersion_offcut_loops(x, s_nodes, g_wts):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        acc = 0.0
        for n in range(s_nodes.shape[0]):
            acc += g_wts[n] / (x[i] - s_nodes[n])
        out[i] = acc
    return out


def _dispersion_offcut_numpy(x, s_nodes, g_wts, chunk=65536):
    out = np.empty(len(x))
    for a in range(0, len(x), chunk):
        b = min(a + chunk, len(x))
        out[a:b] = (1.0 / (x[a:b, None] - s_nodes[None, :])) @ g_wts
    return out


def dispersion_offcut(x, s_nodes, g_wts):
    """Cauchy integral sum_n g_n/(x - s_n) for arrays of off-cut x."""
    if USE_NUMBA:
        return _dispersion_offcut_loops(
            np.ascontiguousarray(x, dtype=float), s_nodes, g_wts)
    return _dispersion_offcut_numpy(np.asarray(x, dtype=float),
                                    s_nodes, g_wts)
