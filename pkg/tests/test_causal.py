import math

import numpy as np
import pytest
from scipy.integrate import quad

from causalfock import causal as cz
from causalfock.causal import (CausalDistribution, DensityModel,
                               GaussianTest1D, SplittingError, build_A_R_D,
                               causal_support_probe, inverse_series,
                               krein_inverse_terms,
                               natural_normalization_coeffs, richardson,
                               singularity_degree, sokhotski_limit,
                               split_retarded_advanced, vacuum_polarization)


def exp_density(s0=1.0):
    return DensityModel(lambda s: np.exp(-np.minimum(s - s0, 700.0)), s0,
                        kind="rational")


def sqrt_exp_density(s0=1.0):
    return DensityModel(
        lambda s: np.sqrt(np.maximum(1 - s0 / s, 0.0))
        * np.exp(-np.minimum(s - s0, 700.0)), s0, kind="threshold-sqrt")


# ---------------------------------------------------------------------------
# vacuum polarization


def test_vacpol_zero_and_limits():
    dist = vacuum_polarization(1.0)
    assert complex(dist.value(0.0)) == 0
    probe = [-1e-4 * 0.5 ** j for j in range(6)]
    lim_p2 = richardson([complex(dist.value(x)) / x for x in probe])
    assert abs(lim_p2) < 1e-10
    lim_p4 = richardson([complex(dist.value(x)) / x ** 2 for x in probe])
    c0 = (1.0 / 3.0) * quad(
        lambda s: (s + 2) / s ** 2 * math.sqrt(1 - 4 / s) / (0 - s),
        4, np.inf)[0]
    assert abs(lim_p4 - c0) < 1e-10
    assert singularity_degree(dist) == 2


def test_vacpol_near_cone_factorization():
    # Pi = (p^2)^2 g0 with g0 regular near the cone: g0 finite, nonzero,
    # with differences shrinking linearly in p^2
    dist = vacuum_polarization(1.0)
    g0 = [complex(dist.value(x)) / x ** 2 for x in (-1e-3, -1e-4, -1e-5)]
    assert 0.01 < abs(g0[2]) < 1.0
    d1, d2 = abs(g0[0] - g0[1]), abs(g0[1] - g0[2])
    assert d2 < 0.2 * d1


def test_vacpol_advanced_matches_direct_quadrature():
    # prescription switching reproduces the directly assembled advanced
    # integral PV + i pi rho on the cut
    dist = vacuum_polarization(1.0)
    ret, adv = split_retarded_advanced(dist)
    x = 6.5
    rho_x = (x + 2) / x ** 2 * math.sqrt(1 - 4 / x)
    pv = adv.density.principal_value(x)
    expect = (1.0 / 3.0) * x ** 2 * (pv + 1j * math.pi * rho_x)
    assert abs(complex(adv.value(x, +1)) - expect) < 1e-10
    # principal-value mode must be requested through the prescription API;
    # the plain off-cut evaluator refuses points on the cut
    with pytest.raises(SplittingError):
        dist.cauchy_offcut(np.array([6.5]))


def test_pv_against_adaptive_oracle():
    dens = vacuum_polarization(1.0).density
    x = 6.0
    rho = lambda s: (s + 2) / s ** 2 * math.sqrt(max(1 - 4 / s, 0.0))
    s_hi = 40.0
    core = quad(lambda s: (rho(s) - rho(x)) / (x - s), 4.0, s_hi,
                points=[x], limit=300)[0]
    oracle = core + rho(x) * math.log((x - 4.0) / (s_hi - x)) + quad(
        lambda s: rho(s) / (x - s), s_hi, np.inf)[0]
    assert abs(dens.principal_value(x) - oracle) < 1e-9


# ---------------------------------------------------------------------------
# singularity degree and splitting


def test_singularity_degrees_synthetic():
    cases = [(exp_density(), 0, -2), (exp_density(), 1, -1),
             (exp_density(), 2, 2), (exp_density(), 3, 4),
             (sqrt_exp_density(), 2, 2)]
    for dens, alpha, expect in cases:
        assert singularity_degree(CausalDistribution(dens, alpha)) == expect


def test_degree_log_toy():
    # transform growing like p^2 log p^2 still has degree 2
    dens = DensityModel(lambda s: 1.0 / (1.0 + s), 0.5, kind="rational")
    assert singularity_degree(CausalDistribution(dens, 2)) == 2


def test_degree_preservation_five_densities():
    for dens, alpha in [(exp_density(), 0), (exp_density(), 1),
                        (exp_density(), 2), (exp_density(), 3),
                        (sqrt_exp_density(), 2)]:
        d = CausalDistribution(dens, alpha)
        om = singularity_degree(d)
        norm = (0.5, 0.25) if om >= 2 else ()
        ret, adv = split_retarded_advanced(d, norm)
        assert singularity_degree(ret) == om
        assert singularity_degree(adv) == om


def test_unique_splitting_refuses_normalization():
    d = CausalDistribution(exp_density(), 0)
    with pytest.raises(SplittingError):
        split_retarded_advanced(d, normalization=(1.0,))
    # and an over-degree polynomial is refused as well
    d2 = CausalDistribution(exp_density(), 2)     # degree 2
    with pytest.raises(SplittingError):
        split_retarded_advanced(d2, normalization=(0.0, 0.0, 1.0))


def test_retarded_minus_advanced_is_jump():
    d = CausalDistribution(exp_density(), 2, normalization=(0.3, -0.1))
    ret, adv = split_retarded_advanced(d, normalization=(0.2, 0.05))
    for x in (0.2, 1.5, 3.0, 8.0):
        for sgn in (+1, -1):
            diff = complex(ret.value(x, sgn)) - complex(adv.value(x, sgn))
            assert abs(diff - complex(d.jump(x, sgn))) < 1e-9


def test_prescription_symmetry():
    d = CausalDistribution(exp_density(), 1)
    ret, adv = split_retarded_advanced(d)
    for x in (2.0, 5.0):
        assert abs(complex(adv.value(x, +1))
                   - complex(ret.value(x, -1))) < 1e-12


def test_natural_normalization_unique():
    d = CausalDistribution(exp_density(), 1)
    c0, c1 = natural_normalization_coeffs(d)
    fixed = CausalDistribution(exp_density(), 1, normalization=(c0, c1))
    assert abs(complex(fixed.value(0.0))) < 1e-12
    seq = [complex(fixed.value(-1e-5 * 0.5 ** j)) / (-1e-5 * 0.5 ** j)
           for j in range(6)]
    assert abs(richardson(seq)) < 1e-10
    # the vacuum polarization's own representation is already natural
    assert natural_normalization_coeffs(vacuum_polarization(1.0)) \
        == pytest.approx((0j, 0j), abs=1e-10)


def test_theta_multiplication_agreement():
    # retarded part from prescription switching equals theta(t) d(t) for
    # tests supported away from the vertex, two independent routes
    d = CausalDistribution(sqrt_exp_density(), 1)
    test = GaussianTest1D(center=3.0, width=0.4)
    via_momentum = cz.retarded_pairing_momentum(d, test)
    via_theta = cz.retarded_pairing_theta(d, test)
    assert abs(via_momentum - via_theta) < 1e-9


# ---------------------------------------------------------------------------
# sokhotski boundary values


def test_sokhotski_k0_k1_closed_forms():
    gauss = lambda u: np.exp(-u * u)
    d1 = lambda u: -2 * u * np.exp(-u * u)
    eps = [0.1 * 2 ** -j for j in range(8)]
    r0 = sokhotski_limit(0, eps, gauss, gauss)
    assert r0["converged"]
    assert abs(richardson(r0["pairings"][-5:]) - r0["closed_form"]) < 1e-6
    # analytic cross-check of the delta part: -i pi f(0)
    assert abs(r0["delta_part"] + math.pi) < 1e-10
    r1 = sokhotski_limit(1, eps, gauss, d1)
    assert r1["converged"]
    assert abs(richardson(r1["pairings"][-5:]) - r1["closed_form"]) < 1e-6


def test_sokhotski_vanishing_test_pure_pv():
    # f vanishing to order k+1 at zero: delta terms annihilated
    f = lambda u: u ** 2 * np.exp(-u * u)
    fd = lambda u: (2 * u - 2 * u ** 3) * np.exp(-u * u)
    r = sokhotski_limit(1, [0.1 * 2 ** -j for j in range(6)], f, fd)
    assert abs(r["closed_form"].imag) < 1e-12
    assert abs(r["pairings"][-1].imag) < 1e-6


def test_sokhotski_jump_test_diverges():
    jump = lambda u: np.where(u > 0, np.exp(-u), 0.0)
    r = sokhotski_limit(1, [0.1 * 2 ** -j for j in range(7)], jump)
    assert not r["converged"]
    assert r["ratios"][-1] > 1.0


# ---------------------------------------------------------------------------
# series inversion and the inductive-step assembly


def matmul(a, b):
    return a @ b


def test_inverse_series_orders(rng):
    n = 6
    x1, x2 = "x1", "x2"
    m1 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    m2 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    m12 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    ident = np.eye(n, dtype=complex)
    s_map = {frozenset(): ident, frozenset({x1}): m1, frozenset({x2}): m2,
             frozenset({x1, x2}): m12}
    sbar = inverse_series(s_map, [x1, x2], matmul, ident)
    assert np.allclose(sbar[frozenset({x1})], -m1)
    # formal oracle: sbar(Z) = -S(Z) + S(x1)S(x2) + S(x2)S(x1), from
    # expanding sum_{X ⊔ Y = Z} sbar(X) S(Y) = 0 by hand
    expect = -m12 + m1 @ m2 + m2 @ m1
    assert np.allclose(sbar[frozenset({x1, x2})], expect)
    # defining identity holds at every order
    for z in [frozenset({x1}), frozenset({x2}), frozenset({x1, x2})]:
        acc = np.zeros((n, n), dtype=complex)
        subsets = [frozenset(), *[frozenset({v}) for v in z]]
        if len(z) == 2:
            subsets.append(z)
        for x in subsets:
            acc = acc + sbar[x] @ s_map[z - x]
        assert np.max(np.abs(acc)) < 1e-10


def test_krein_route_matches_series_route(rng):
    # exponential-type family S(X) = (iL)^{|X|} with Krein-selfadjoint L:
    # the series inverse and eta S+ eta coincide order by order
    n = 5
    eta = np.array([1.0, -1.0, 1.0, 1.0, -1.0])
    from causalfock.fock import krein_adjoint
    raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    L = 0.5 * (raw + krein_adjoint(raw, eta))
    assert np.allclose(krein_adjoint(L, eta), L)
    assert np.allclose(krein_adjoint(1j * L, eta), -1j * L)
    variables = ["x1", "x2", "x3"]
    s_map = {}
    for r in range(4):
        import itertools as it
        for combo in it.combinations(variables, r):
            s_map[frozenset(combo)] = np.linalg.matrix_power(1j * L, r) \
                if r else np.eye(n, dtype=complex)
    sbar = inverse_series(s_map, variables, matmul, np.eye(n, dtype=complex))
    krein = krein_inverse_terms(s_map, eta)
    for key in s_map:
        assert np.max(np.abs(sbar[key] - krein[key])) < 1e-10


def test_build_a_r_d_counts_and_identity(rng):
    n = 4
    variables = ["x1", "x2"]
    xn = "x3"
    import itertools as it
    s_map = {}
    for r in range(4):
        for combo in it.combinations(variables + [xn], r):
            m = (np.eye(n, dtype=complex) if r == 0 else
                 rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
            s_map[frozenset(combo)] = m
    asm = build_A_R_D(s_map, variables, xn, matmul)
    assert asm.n_partitions == 2 ** len(variables) - 1 == 3
    # A - R = A' - R' (the boxed rearrangement)
    lhs = asm.a_full - asm.r_full
    rhs = asm.a_prime - asm.r_prime
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    assert np.max(np.abs(asm.d - (asm.r_prime - asm.a_prime))) < 1e-14


def test_order2_commutator_assembly(scalar_grid):
    # n = 2 with S1 = i phi(x): D2 = [S(x1), S(x2)] = -[phi1, phi2]; the
    # wick decomposition leaves only the scalar kernel, equal to minus
    # the antisymmetrized two-point function, odd under x1 <-> x2
    from causalfock.kernels import OperatorSum, scalar_kernel
    from causalfock.testfns import gaussian_test
    from causalfock.wick import pointwise_wick_kernels, wick_decompose_product
    t1 = gaussian_test(width=1.2)
    t2 = gaussian_test(center=(0.3, 0.1, 0, 0), width=1.5)
    f1 = pointwise_wick_kernels(":phi:", scalar_grid, t1).scaled(1j)
    f2 = pointwise_wick_kernels(":phi:", scalar_grid, t2).scaled(1j)

    def product(a, b):
        return wick_decompose_product(a, b, 0.5)

    ident = OperatorSum(scalar_grid, [(1.0, scalar_kernel(scalar_grid, 1.0))])
    s_map = {frozenset(): ident, frozenset({"x1"}): f1,
             frozenset({"x2"}): f2,
             frozenset({"x1", "x2"}): product(f1, f2)}
    asm = build_A_R_D(s_map, ["x1"], "x2", product)
    d2 = asm.d.prune(1e-14)
    sigs = [(k.l, k.m) for _c, k in d2.terms]
    assert sigs == [(0, 0)]
    # oracle: commutator scalar = -(two-point(1,2) - two-point(2,1))
    sp = scalar_grid["phi"]
    k1a = [k for _c, k in f1.terms if (k.l, k.m) == (0, 1)][0]
    k1c = [k for _c, k in f1.terms if (k.l, k.m) == (1, 0)][0]
    k2a = [k for _c, k in f2.terms if (k.l, k.m) == (0, 1)][0]
    k2c = [k for _c, k in f2.terms if (k.l, k.m) == (1, 0)][0]
    tp12 = np.sum(sp.flat_weights() * k1a.array * k2c.array)
    tp21 = np.sum(sp.flat_weights() * k2a.array * k1c.array)
    c, kd = d2.terms[0]
    # D2 = [i phi_1, i phi_2] = -[phi_1, phi_2]: scalar tp21 - tp12
    assert abs(c * complex(kd.array) - (tp21 - tp12)) < 1e-14
    # odd under exchanging the two points (their test functions)
    s_map_swapped = {frozenset(): ident, frozenset({"x1"}): f2,
                     frozenset({"x2"}): f1,
                     frozenset({"x1", "x2"}): product(f2, f1)}
    asm2 = build_A_R_D(s_map_swapped, ["x1"], "x2", product)
    c2, kd2 = asm2.d.prune(1e-14).terms[0]
    assert abs(c * complex(kd.array) + c2 * complex(kd2.array)) < 1e-14


def test_causal_support_probe_examples():
    rep = causal_support_probe([(0.5, 2.0), (1.0, 1.5),   # spacelike
                                (2.0, 0.5), (3.0, 1.0)])  # timelike
    for entry in rep[:2]:
        assert not entry["inside_cone"]
        assert abs(entry["value"]) < 1e-8
        assert entry["spacelike_ok"]
    for entry in rep[2:]:
        assert entry["inside_cone"]
        assert abs(entry["value"] + 0.5) < 1e-7
