"""Causal-splitting engine on one-variable dispersion representations.

A causal coefficient distribution is stored through its spectral side:

    d(p) = prefactor * (p^2)^alpha * int_{s0}^inf rho(s) / (p^2 - s + ie) ds
           + polynomial(p^2),

where the infinitesimal prescription ``ie`` selects the member of the
causal family:

    'causal'    p^2 - s + i0          (time-ordered-type boundary value)
    'retarded'  p^2 - s + i p0 0      (support in the forward cone)
    'advanced'  p^2 - s - i p0 0      (support in the past cone)

Splitting a causal distribution into retarded and advanced parts is
performed by switching the prescription inside this representation; the
ambiguity is a polynomial in p^2 of degree bounded by the singularity
degree, added to both parts.  The retarded-minus-advanced difference is
prescription-independent, equal to the spectral jump

    -2 pi i sgn(p0) prefactor (p^2)^alpha rho(p^2) theta(p^2 >= s0).

Away from the cone vertex the retarded part agrees with multiplication
by the step function in the 1D time realization

    d(t) = -2 prefactor int_{sqrt(s0)}^inf rho(E^2) E^{2 alpha} sin(E t) dE,

which the theta-agreement check exercises through two independent
quadrature routes.  Fourier convention: f~(P) = int e^{+iPt} f(t) dt.
"""

import itertools
import math

import numpy as np
from scipy import integrate

PRESCRIPTIONS = ("causal", "retarded", "advanced")


class SplittingError(ValueError):
    pass


class DensityModel:
    """Spectral density on [s0, inf) with a quadrature substitution that
    removes the endpoint/tail behaviour.

    kind 'threshold-sqrt': rho carries a sqrt(1 - s0/s) factor vanishing
    at threshold; substitution s = s0/(1-u^2).  kind 'rational': generic
    smooth decaying rho; substitution s = s0 + v/(1-v).
    """

    def __init__(self, rho, s0, kind="rational", nodes=160):
        self.rho = rho
        self.s0 = float(s0)
        self.kind = kind
        u, w = np.polynomial.legendre.leggauss(nodes)
        self._u = 0.5 * (u + 1)
        self._w = 0.5 * w
        if kind == "threshold-sqrt":
            if self.s0 <= 0:
                raise SplittingError("threshold-sqrt substitution needs s0 > 0")
            self._s = self.s0 / (1 - self._u ** 2)
            self._ds = 2 * self.s0 * self._u / (1 - self._u ** 2) ** 2
        elif kind == "rational":
            self._s = self.s0 + self._u / (1 - self._u)
            self._ds = 1.0 / (1 - self._u) ** 2
        else:
            raise SplittingError(f"unknown substitution kind {kind!r}")
        self._g = self.rho(self._s) * self._ds

    def cauchy_integral(self, x):
        """int rho(s)/(x - s) ds for x (array) off the cut [s0, inf)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(len(x))
        chunk = 65536 // max(len(self._s), 1) + 1
        for a in range(0, len(x), chunk):
            b = min(a + chunk, len(x))
            out[a:b] = (1.0 / (x[a:b, None] - self._s[None, :])) @ (self._w * self._g)
        return out

    def principal_value(self, x):
        """PV int rho(s)/(x - s) ds for x on the cut, by pole subtraction
        on a finite window plus the smooth tail."""
        x = float(x)
        if x < self.s0:
            return float(self.cauchy_integral(np.array([x]))[0])
        span = max(2.0 * (x - self.s0), x, 10.0 * max(self.s0, 1.0))
        s_hi = x + span
        rho_x = float(self.rho(np.array([x]))[0])
        core = integrate.quad(
            lambda s: (float(self.rho(np.array([s]))[0]) - rho_x) / (x - s),
            self.s0, s_hi, points=[x], limit=200)[0]
        log_term = rho_x * math.log((x - self.s0) / (s_hi - x))
        tail = integrate.quad(
            lambda s: float(self.rho(np.array([s]))[0]) / (x - s),
            s_hi, np.inf, limit=200)[0]
        return core + log_term + tail

    def density_at(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vals = np.where(x >= self.s0, self.rho(np.maximum(x, self.s0)), 0.0)
        return vals


def vacuum_polarization_density(m):
    """rho(s) = (s + 2 m^2) s^{-2} sqrt(1 - 4 m^2 / s) on [4 m^2, inf)."""
    def rho(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(invalid="ignore"):
            val = (s + 2 * m * m) / s ** 2 * np.sqrt(
                np.maximum(1 - 4 * m * m / s, 0.0))
        return val
    return DensityModel(rho, 4 * m * m, kind="threshold-sqrt")


class CausalDistribution:
    """One-variable dispersion representation of a causal coefficient.

    normalization holds polynomial coefficients (c0, c1, ...) in p^2; the
    degree in p of the polynomial is 2*(len-1) and must stay within the
    singularity degree when used as splitting freedom.
    """

    def __init__(self, density: DensityModel, alpha, prescription="causal",
                 prefactor=1.0, normalization=()):
        if prescription not in PRESCRIPTIONS:
            raise SplittingError(f"unknown prescription {prescription!r}")
        self.density = density
        self.alpha = int(alpha)
        self.prescription = prescription
        self.prefactor = complex(prefactor)
        self.normalization = tuple(complex(c) for c in normalization)

    def with_prescription(self, prescription, normalization=None):
        return CausalDistribution(
            self.density, self.alpha, prescription, self.prefactor,
            self.normalization if normalization is None else normalization)

    def _poly(self, p2):
        out = np.zeros_like(np.asarray(p2, dtype=complex))
        for j, c in enumerate(self.normalization):
            out = out + c * np.asarray(p2, dtype=complex) ** j
        return out

    def value(self, p2, p0_sign=1):
        """Boundary value at real p^2 (array ok) with the stored
        prescription; principal value plus the i pi rho on-cut term."""
        p2 = np.atleast_1d(np.asarray(p2, dtype=float))
        res = np.zeros(p2.shape, dtype=complex)
        off = p2 < self.density.s0
        if np.any(off):
            res[off] = self.density.cauchy_integral(p2[off])
        on = ~off
        if np.any(on):
            for i in np.nonzero(on)[0]:
                res[i] = self.density.principal_value(p2[i])
            if self.prescription == "causal":
                side = -1.0
            elif self.prescription == "retarded":
                side = -float(np.sign(p0_sign)) if p0_sign else 0.0
            else:
                side = +float(np.sign(p0_sign)) if p0_sign else 0.0
            res[on] = res[on] + 1j * math.pi * side * \
                self.density.density_at(p2[on])
        out = self.prefactor * p2 ** self.alpha * res + self._poly(p2)
        return out if out.shape != (1,) else complex(out[0])

    def cauchy_offcut(self, p2):
        """Vectorized evaluation for p^2 strictly below the cut (real)."""
        p2 = np.asarray(p2, dtype=float)
        if np.any(p2 >= self.density.s0):
            raise SplittingError("cauchy_offcut requires p^2 below the cut")
        flat = p2.reshape(-1)
        vals = self.prefactor * flat ** self.alpha * \
            self.density.cauchy_integral(flat) + self._poly(flat)
        return vals.reshape(p2.shape)

    def jump(self, p2, p0_sign=1):
        """Retarded-minus-advanced spectral jump (normalization-free)."""
        p2 = np.atleast_1d(np.asarray(p2, dtype=float))
        out = (-2j * math.pi * np.sign(p0_sign) * self.prefactor
               * p2 ** self.alpha * self.density.density_at(p2))
        return out if out.shape != (1,) else complex(out[0])

    def time_kernel(self, t):
        """1D time realization d(t) (the inverse transform of the jump at
        zero spatial momentum); decaying densities only."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        e0 = math.sqrt(max(self.density.s0, 0.0))

        def integrand(E, tt):
            return (self.density.rho(np.array([E * E]))[0]
                    * E ** (2 * self.alpha) * math.sin(E * tt))

        out = np.empty(len(t), dtype=complex)
        for i, tt in enumerate(t):
            val = integrate.quad(integrand, e0, np.inf, args=(tt,),
                                 limit=400)[0]
            out[i] = -2.0 * self.prefactor * val
        return out if out.shape != (1,) else complex(out[0])


def singularity_degree(dist: CausalDistribution, scale=1.0, decades=(2, 6),
                       samples=17):
    """Integer degree from the large-momentum growth of the dispersion
    representation.

    Fits the slope of log|d| against log|p^2| on spacelike points over
    the decade window; degree = round(2*slope).  Representations that do
    not grow (slope below 0.25) report the unique-splitting branch: the
    degree is capped at -1.  Raises when the fit is not power-like.
    """
    exps = np.linspace(decades[0], decades[1], samples)
    p2 = -scale * 10.0 ** exps
    vals = np.abs(dist.cauchy_offcut(p2) - dist._poly(p2))
    if np.any(vals == 0):
        return -1
    logv = np.log10(vals)
    slope, _b = np.polyfit(exps, logv, 1)
    resid = logv - np.polyval([slope, _b], exps)
    curvature = np.max(np.abs(resid))
    if curvature > 0.2 * (1 + abs(slope)):
        raise SplittingError(
            f"momentum-space growth is not polynomial (fit residual "
            f"{curvature:.2f}); out of the model class")
    if slope < 0.25:
        return min(int(round(2 * slope)), -1)
    return int(round(2 * slope))


def split_retarded_advanced(dist: CausalDistribution, normalization=()):
    """Retarded/advanced pair by prescription switching, with the
    polynomial normalization added to both parts.

    The polynomial degree in p (= 2*(len(normalization)-1)) must not
    exceed the singularity degree; degree < 0 forces the zero polynomial
    (unique splitting).
    """
    omega = singularity_degree(dist)
    coeffs = tuple(complex(c) for c in normalization)
    while coeffs and coeffs[-1] == 0:
        coeffs = coeffs[:-1]
    if coeffs:
        poly_degree = 2 * (len(coeffs) - 1)
        if omega < 0:
            raise SplittingError(
                "singularity degree < 0: the splitting is unique and no "
                "normalization polynomial is admissible")
        if poly_degree > omega:
            raise SplittingError(
                f"normalization degree {poly_degree} exceeds the "
                f"singularity degree {omega}")
    total = tuple(a + b for a, b in itertools.zip_longest(
        dist.normalization, coeffs, fillvalue=0.0))
    retarded = dist.with_prescription("retarded", total)
    advanced = dist.with_prescription("advanced", total)
    return retarded, advanced


def vacuum_polarization(m, prescription="causal", normalization=()):
    """The one-loop vacuum polarization scalar: prefactor 1/3, alpha = 2,
    spectral density (s+2m^2) s^{-2} sqrt(1-4m^2/s) above 4m^2.

    The dispersion representation is already naturally normalized: the
    value and its first p^2-derivative vanish at p^2 = 0.
    """
    if m <= 0:
        raise SplittingError("vacuum_polarization requires m > 0")
    return CausalDistribution(
        vacuum_polarization_density(m), alpha=2, prescription=prescription,
        prefactor=1.0 / 3.0, normalization=normalization)


def natural_normalization_coeffs(dist: CausalDistribution, probe=1e-4,
                                 levels=6):
    """(c0, c1) of the degree-2 polynomial in p that enforces value and
    first p^2-derivative zero at p^2 = 0, by solving the 2x2 system."""
    c0 = -complex(dist.value(0.0))
    seq = []
    for j in range(levels):
        x = -probe * 0.5 ** j
        seq.append((complex(dist.value(x)) + c0) / x)
    c1 = -richardson(seq)
    return c0, c1


def richardson(seq, ratio=2.0, first_order=1):
    """Limit of a sequence whose error expands in integer powers of the
    step, nodes shrinking by `ratio` per entry (classic tableau: level
    l cancels the step^(first_order + l) term)."""
    v = [complex(x) for x in seq]
    level = 0
    while len(v) > 1:
        f = ratio ** (first_order + level)
        v = [(f * v[i + 1] - v[i]) / (f - 1) for i in range(len(v) - 1)]
        level += 1
    return v[0]


# ---------------------------------------------------------------------------
# Sokhotski boundary values: 1/(u + i eps)^{k+1}


def sokhotski_pairing(k, eps, fn, lo=-30.0, hi=30.0, limit=800):
    """Adaptive quadrature of int f(u) / (u + i eps)^{k+1} du; the sole
    interior feature sits at u = 0 on the scale eps."""
    def re_part(u):
        return (fn(np.array([u]))[0] / (u + 1j * eps) ** (k + 1)).real

    def im_part(u):
        return (fn(np.array([u]))[0] / (u + 1j * eps) ** (k + 1)).imag

    pts = [0.0, -eps, eps, -10 * eps, 10 * eps]
    pts = sorted(p for p in pts if lo < p < hi)
    re = integrate.quad(re_part, lo, hi, points=pts, limit=limit)[0]
    im = integrate.quad(im_part, lo, hi, points=pts, limit=limit)[0]
    return re + 1j * im


def sokhotski_closed_form(k, fn_deriv_k, lo=-30.0, hi=30.0):
    """PV int f^{(k)}(u)/u du / k!  -  i pi f^{(k)}(0) / k!

    (the k-th derivative enters through k partial integrations of the
    limiting distribution).  PV computed from the odd part.
    """
    pv = integrate.quad(
        lambda u: (fn_deriv_k(u) - fn_deriv_k(-u)) / u, 1e-12, hi,
        limit=400)[0]
    fact = math.factorial(k)
    return (pv - 1j * math.pi * fn_deriv_k(0.0)) / fact


def sokhotski_limit(k, eps_seq, fn, fn_deriv_k=None):
    """Structured epsilon -> 0 study of the boundary-value pairing.

    Returns a dict with the pairing sequence, Cauchy differences, a
    contraction verdict, and (when the k-th derivative is supplied) the
    closed-form limit split into PV and delta parts.
    """
    eps_seq = list(eps_seq)
    pairings = [sokhotski_pairing(k, e, fn) for e in eps_seq]
    diffs = [abs(pairings[i + 1] - pairings[i])
             for i in range(len(pairings) - 1)]
    ratios = [diffs[i + 1] / diffs[i] if diffs[i] > 0 else 0.0
              for i in range(len(diffs) - 1)]
    converged = len(ratios) >= 2 and all(r < 0.9 for r in ratios[-2:])
    out = {"eps": eps_seq, "pairings": pairings, "differences": diffs,
           "ratios": ratios, "converged": converged}
    if fn_deriv_k is not None:
        closed = sokhotski_closed_form(k, fn_deriv_k)
        out["pv_part"] = closed.real
        out["delta_part"] = closed.imag
        out["closed_form"] = closed
    return out


# ---------------------------------------------------------------------------
# order-by-order series inversion and the A'/R'/D assembly


class SOperatorTerm:
    """Order-n contribution with subset-indexed payloads.

    ``payloads`` maps frozensets of variable labels to operator payloads
    (matrices on the truncated space, or OperatorSum).  The empty set
    holds the identity.
    """

    def __init__(self, order, payloads):
        self.order = int(order)
        self.payloads = dict(payloads)
        for key in self.payloads:
            if len(key) != self.order and self.order != 0:
                raise SplittingError("payload subset size must equal order")

    def __getitem__(self, subset):
        return self.payloads[frozenset(subset)]


def _subsets(variables):
    variables = list(variables)
    for r in range(len(variables) + 1):
        for combo in itertools.combinations(variables, r):
            yield frozenset(combo)


def inverse_series(s_map, variables, product, identity):
    """Formal-inverse payloads: sbar(Z) with
    sum_{X disjoint-union Y = Z} sbar(X) s(Y) = 0 for Z nonempty.

    ``s_map`` maps frozensets (including the empty set -> identity) to
    payloads; ``product`` multiplies payloads (left argument acts last).
    """
    variables = list(variables)
    sbar = {frozenset(): identity}
    for z in sorted(_subsets(variables), key=len):
        if not z:
            continue
        acc = None
        for x in _subsets(z):
            if x == z:
                continue
            term = product(sbar[x], s_map[z - x])
            acc = term if acc is None else acc + term
        sbar[z] = -acc
    return sbar


def krein_inverse_terms(s_map, eta_signs):
    """Metric-adjoint route to the inverse: sbar(X) = eta S(X)+ eta on
    matrices in an orthonormal basis (the unitarity identity of the
    indefinite-metric theory)."""
    from .fock import krein_adjoint
    return {x: (np.eye(len(eta_signs), dtype=complex) if not x
                else krein_adjoint(m, eta_signs))
            for x, m in s_map.items()}


class CausalAssembly:
    """A'(Z, xn), R'(Z, xn), D = R' - A' and the completed A, R."""

    def __init__(self, a_prime, r_prime, d, a_full, r_full, n_partitions):
        self.a_prime = a_prime
        self.r_prime = r_prime
        self.d = d
        self.a_full = a_full
        self.r_full = r_full
        self.n_partitions = n_partitions


def build_A_R_D(s_map, variables, xn, product):
    """Inductive-step assembly of the causal split at order n = |variables|+1.

    variables = {x1..x_{n-1}}, xn the distinguished point;
    A' = sum over nonempty X of sbar(X) s(Y + xn), R' the reversed order,
    D = R' - A'; A = A' + S(full), R = R' + S(full), so that
    A - R = A' - R' identically.
    """
    variables = list(variables)
    identity = s_map[frozenset()]
    sbar = inverse_series(
        {k: v for k, v in s_map.items() if xn not in k},
        variables, product, identity)
    a_prime = None
    r_prime = None
    count = 0
    for x in _subsets(variables):
        if not x:
            continue
        y = frozenset(variables) - x
        rest = y | {xn}
        a_term = product(sbar[x], s_map[rest])
        r_term = product(s_map[rest], sbar[x])
        a_prime = a_term if a_prime is None else a_prime + a_term
        r_prime = r_term if r_prime is None else r_prime + r_term
        count += 1
    full = s_map[frozenset(variables) | {xn}]
    return CausalAssembly(a_prime, r_prime, r_prime - a_prime,
                          a_prime + full, r_prime + full, count)


# ---------------------------------------------------------------------------
# 1+1-dimensional causal support probe


def pauli_jordan_1p1(t, z):
    """Closed form of the massless 1+1 commutator function,
    -(1/4)(sgn(t+z) + sgn(t-z)): supported on the closed light cone."""
    return -0.25 * (np.sign(t + z) + np.sign(t - z))


def _half_sine_integral(u):
    """int_0^inf sin(u k)/k dk by split quadrature (regular head plus
    oscillatory-weight tail)."""
    if u == 0:
        return 0.0
    head = integrate.quad(
        lambda k: math.sin(u * k) / k if k > 0 else u, 0.0, 1.0, limit=200)[0]
    tail = integrate.quad(lambda k: 1.0 / k, 1.0, np.inf,
                          weight="sin", wvar=u, limit=400)[0]
    return head + tail


def causal_support_probe(points, tol=1e-8):
    """Numerical support verdict for the massless 1+1 toy.

    Evaluates the mode-integral realization at each (t, z) probe point
    and reports |value|, the closed-form reference, and whether the
    point is inside the closed cone; spacelike values must vanish
    below tol.
    """
    report = []
    for (t, z) in points:
        val = -(0.5 / math.pi) * (_half_sine_integral(t + z)
                                  + _half_sine_integral(t - z))
        ref = pauli_jordan_1p1(t, z)
        inside = abs(t) >= abs(z)
        entry = {"t": t, "z": z, "value": val, "reference": float(ref),
                 "inside_cone": bool(inside),
                 "spacelike_ok": bool(inside or abs(val) < tol)}
        report.append(entry)
    return report


# ---------------------------------------------------------------------------
# theta-multiplication agreement in the 1D time realization


def retarded_pairing_momentum(dist: CausalDistribution, test,
                              p_max=None, limit=800):
    """<retarded part, f> via the momentum-space route:
    (1/2pi) int r~(p0) f~(-p0) dp0 with r~ from the +i p0 0 prescription."""
    e0 = math.sqrt(max(dist.density.s0, 0.0))

    def integrand_re(p0):
        v = dist.with_prescription("retarded").value(p0 * p0, p0_sign=np.sign(p0))
        return (v * test.fourier_1d(-p0)).real

    def integrand_im(p0):
        v = dist.with_prescription("retarded").value(p0 * p0, p0_sign=np.sign(p0))
        return (v * test.fourier_1d(-p0)).imag

    hi = p_max if p_max is not None else test.support_momentum()
    pts = [x for x in (-e0, 0.0, e0) if -hi < x < hi]
    re = integrate.quad(integrand_re, -hi, hi, points=pts, limit=limit)[0]
    im = integrate.quad(integrand_im, -hi, hi, points=pts, limit=limit)[0]
    return (re + 1j * im) / (2 * math.pi)


def retarded_pairing_theta(dist: CausalDistribution, test, limit=400):
    """<theta(t) d(t), f> via the position-space route (the natural
    step-function formula, meaningful for tests supported away from
    t = 0)."""
    lo, hi = test.support_window()
    lo = max(lo, 0.0)
    if hi <= lo:
        return 0j

    def integrand_re(t):
        return (dist.time_kernel(t) * test.value_1d(t)).real

    def integrand_im(t):
        return (dist.time_kernel(t) * test.value_1d(t)).imag

    re = integrate.quad(integrand_re, lo, hi, limit=limit)[0]
    im = integrate.quad(integrand_im, lo, hi, limit=limit)[0]
    return re + 1j * im


class GaussianTest1D:
    """Gaussian test function in one (time) variable with closed-form
    transform; center it away from t=0 for the theta checks."""

    def __init__(self, center, width):
        self.center = float(center)
        self.width = float(width)

    def value_1d(self, t):
        return np.exp(-(t - self.center) ** 2 / (2 * self.width ** 2))

    def fourier_1d(self, p):
        # int e^{+ipt} f(t) dt
        return (math.sqrt(2 * math.pi) * self.width
                * np.exp(1j * p * self.center - 0.5 * (self.width * p) ** 2))

    def support_window(self, n_sigmas=10.0):
        return (self.center - n_sigmas * self.width,
                self.center + n_sigmas * self.width)

    def support_momentum(self, n_sigmas=12.0):
        return n_sigmas / self.width
