import math

import numpy as np
import pytest

from causalfock import adiabatic as ad
from causalfock.adiabatic import (AdiabaticError, ChainSpec,
                                  DecompositionError, EpsilonFamily,
                                  chain_family, chain_kernel,
                                  classify_contribution, decompose_1d,
                                  direct_pairing_1d, epsilon_verdict,
                                  ir_l2_probe, psi_int_denominator_bound,
                                  psi_int_first_order_kernel)
from causalfock.causal import GaussianTest1D
from causalfock.testfns import gaussian_test


SMALL = dict(n_radial=12, n_directions=4)


def naive_chain_oracle(spec, eps):
    """Independent coarse re-evaluation of the chain quadrature: plain
    python loops over the same nodes."""
    from causalfock import fields
    (p1, w1), (p2, w2) = ad._chain_grids(spec)
    s1, s2 = ad._branch_signs(spec.branch)
    x1, u2 = ad._spinor_tables((p1, p2), spec.mass, spec.nu, spec.branch)
    insertion = ad.chain_insertion(spec)
    xi = ad.default_xi(spec)
    xi1, xi2 = xi(p1), xi(p2)
    total = 0j
    for i in range(len(p1)):
        e1 = math.sqrt(p1[i] @ p1[i] + spec.mass ** 2)
        for j in range(len(p2)):
            e2 = math.sqrt(p2[j] @ p2[j] + spec.mass ** 2)
            p0 = s1 * e1 + s2 * e2
            pv = s1 * p1[i] + s2 * p2[j]
            ups = p0 ** 2 - pv @ pv
            spin = np.dot(x1[i], u2[j])
            phit = math.exp(-(p0 ** 2 + pv @ pv) / (2 * spec.phi_width ** 2))
            pival = complex(insertion.cauchy_offcut(np.array([ups]))[0]) \
                if spec.k else 1.0
            val = w1[i] * w2[j] * xi1[i] * xi2[j] * spin * phit
            if spec.k:
                val = val * pival ** spec.k
            total += val / (ups + 1j * eps * p0) ** (spec.k + 1)
    return total


def test_chain_k0_matches_naive_oracle():
    spec = ChainSpec(k=0, **SMALL)
    val = chain_kernel(spec, None, None, None, 0.35)
    oracle = naive_chain_oracle(spec, 0.35)
    assert abs(val - oracle) < 1e-8 * max(abs(oracle), 1.0)


def test_chain_k1_matches_naive_oracle():
    spec = ChainSpec(k=1, **SMALL)
    val = chain_kernel(spec, None, None, None, 0.2)
    oracle = naive_chain_oracle(spec, 0.2)
    assert abs(val - oracle) < 1e-8 * max(abs(oracle), 1.0)


def test_chain_backends_agree():
    # the compiled pair loop and the chunked-numpy fallback produce the
    # same sums regardless of which one is active
    from causalfock import accel
    spec = ChainSpec(k=1, **SMALL)
    (p1, w1), (p2, w2) = ad._chain_grids(spec)
    e1 = np.sqrt(np.sum(p1 * p1, axis=1) + spec.mass ** 2)
    e2 = np.sqrt(np.sum(p2 * p2, axis=1) + spec.mass ** 2)
    x1, u2 = ad._spinor_tables((p1, p2), spec.mass, spec.nu, spec.branch)
    xi = ad.default_xi(spec)
    ins = ad.chain_insertion(spec)
    args = (e1, p1, w1 * xi(p1), x1, e2, p2, w2 * xi(p2), u2, 1.0, -1.0,
            spec.k, np.array([0.3, 0.1]), ins.density._s,
            ins.density._w * ins.density._g, float(ins.prefactor.real),
            ins.alpha, np.zeros(1), spec.phi_width ** 2)
    via_numpy = accel._chain_sum_numpy(*args)
    via_active = accel.chain_sum(*args)
    assert np.max(np.abs(via_numpy - via_active)) \
        < 1e-11 * np.max(np.abs(via_numpy))


def test_chain_general_path_matches_fast_path():
    spec = ChainSpec(k=1, **SMALL)
    phi = gaussian_test(width=spec.phi_width)
    fam_fast = chain_family(spec)
    fam_gen = chain_family(spec, phi=phi)
    for a, b in zip(fam_fast.values, fam_gen.values):
        assert abs(a - b) < 1e-9 * max(abs(a), 1.0)


def test_chain_away_from_cone_is_eps_independent():
    # test function supported away from the cone: the denominator is
    # bounded below, so the regulator can shrink freely and the value is
    # eps-independent at tolerance
    spec = ChainSpec(k=1, **SMALL)
    phi = gaussian_test(center=(0.0, 2.5, 0.0, 0.0), width=0.3)
    fam = chain_family(spec, phi=phi, eps_values=[4e-8, 2e-8, 1e-8, 5e-9])
    vals = fam.values
    assert abs(vals[0]) > 1e-6          # the probe actually sees support
    spread = max(abs(v - vals[0]) for v in vals)
    assert spread < 1e-9 * abs(vals[0])


def test_chain_requires_positive_eps_and_mass():
    with pytest.raises(AdiabaticError):
        chain_family(ChainSpec(**SMALL), eps_values=[0.1, -0.1])
    with pytest.raises(AdiabaticError):
        ChainSpec(mass=-1.0)
    with pytest.raises(AdiabaticError):
        chain_family(ChainSpec(mass=0.0, **SMALL))


def test_chain_refuses_vanishing_invariant():
    # same stagger on both grids puts p1 = p2 pairs on the diagonal,
    # where neither the eps term nor the invariant protects
    spec = ChainSpec(**SMALL)
    (p1, w1), _ = ad._chain_grids(spec)
    import causalfock.adiabatic as mod
    orig = mod._chain_grids
    mod._chain_grids = lambda s: ((p1, w1), (p1, w1))
    try:
        with pytest.raises(AdiabaticError):
            chain_family(spec)
    finally:
        mod._chain_grids = orig


def test_chain_branch_sign_consistency():
    # grid-role exchange conjugates the mixed-branch value (the pair
    # energy difference is odd under it, everything else even)
    spec = ChainSpec(k=1, **SMALL)
    swapped = ChainSpec(k=1, stagger1=0.75, stagger2=0.25, **SMALL)
    fam = chain_family(spec, eps_values=[0.3, 0.1])
    fam_sw = chain_family(swapped, eps_values=[0.3, 0.1])
    for a, b in zip(fam.values, fam_sw.values):
        assert abs(np.conj(a) - b) < 1e-12 * max(abs(a), 1.0)


def test_psi_int_branch_flip_reflection(rng):
    # flipping both branch choices reflects the slashed momentum: for an
    # even transform, the flipped pair sums to 2 m gamma^{nu'} u phit / D
    from causalfock import fields
    phi = gaussian_test(width=1.7)
    m = 1.0
    for _ in range(20):
        pp = rng.standard_normal(3)
        pe = rng.standard_normal(3)
        if np.linalg.norm(pp) < 1e-2:
            continue
        for pair in (("annihilate-annihilate", "create-create"),
                     ("create-annihilate", "annihilate-create")):
            s1, _ = ad._branch_signs(pair[0])
            rp = np.linalg.norm(pp)
            e_p = math.sqrt(pe @ pe + m * m)
            qp = s1 * np.concatenate([[rp], pp])
            q = ad._branch_signs(pair[0])[1] * np.concatenate([[e_p], pe])
            total = qp + q
            denom = -rp * (qp[0] * q[0] - qp[1:] @ q[1:])
            for comp in range(4):
                ka = psi_int_first_order_kernel(2, pp, 1, pe, pair[0],
                                                phi, m, comp)
                kc = psi_int_first_order_kernel(2, pp, 1, pe, pair[1],
                                                phi, m, comp)
                expect = 2 * m * (fields.GAMMA[2]
                                  @ fields.u_spinor(1, pe, m))[comp] \
                    * phi.fourier(total) / denom
                assert abs(ka + kc - expect) < 1e-12 * max(abs(expect), 1.0)


def test_epsilon_verdict_synthetic_sequences():
    eps = [0.4 * 0.5 ** j for j in range(8)]
    const = EpsilonFamily(eps, [2.0 + 0j] * 8)
    v = epsilon_verdict(const)
    assert v["verdict"] == "converged"
    assert abs(v["value"] - 2.0) < 1e-12
    linear = EpsilonFamily(eps, [1.5 + 0.3 * e for e in eps])
    v = epsilon_verdict(linear)
    assert v["verdict"] == "converged"
    assert abs(v["value"] - 1.5) < 1e-3
    logdiv = EpsilonFamily(eps, [math.log(1 / e) for e in eps])
    v = epsilon_verdict(logdiv)
    assert v["verdict"] == "diverged"


def test_epsilon_verdict_preconditions():
    with pytest.raises(AdiabaticError):
        epsilon_verdict(EpsilonFamily([0.4, 0.2, 0.1], [1, 2, 3]))
    with pytest.raises(AdiabaticError):
        epsilon_verdict(EpsilonFamily([0.4, 0.3, 0.2, 0.15, 0.1],
                                      [1, 2, 3, 4, 5]))


def test_psi_int_estimate_bound(rng):
    # |denominator|^{-1} > (|p'|^2 (p0 + |p|))^{-1} pointwise
    phi = gaussian_test(width=2.0)
    m = 1.0
    for _ in range(50):
        pp = rng.standard_normal(3)
        pe = rng.standard_normal(3)
        if np.linalg.norm(pp) < 1e-3:
            continue
        rp = np.linalg.norm(pp)
        e_p = math.sqrt(pe @ pe + m * m)
        mink = rp * e_p - pp @ pe          # (-,-) branch denominator core
        denom = abs(rp * (pp @ pe - rp * e_p))
        bound = psi_int_denominator_bound(pp, pe, m)
        assert denom <= bound + 1e-12
        assert denom > 0


def test_psi_int_zero_test_function():
    dead = gaussian_test(center=(50.0, 0, 0, 0), width=0.05)
    val = psi_int_first_order_kernel(0, np.array([0.5, 0, 0]), 1,
                                     np.array([0.3, 0.2, 0]),
                                     "annihilate-annihilate", dead, 1.0)
    assert abs(val) < 1e-300


def psi_int_refinement_grids(n_photon, n_electron=40):
    radii = np.geomspace(0.05, 2.0, n_photon)
    edges = np.sqrt(radii[1:] * radii[:-1])
    edges = np.concatenate([[0.05], edges, [2.0]])
    wp = radii ** 2 * np.diff(edges)
    pe = np.linspace(0.2, 1.5, n_electron)
    we = np.full(n_electron, (1.5 - 0.2) / n_electron) * pe ** 2
    return {
        "photon_points": [np.array([r, 0.15, 0.0]) for r in radii],
        "photon_weights": wp,
        "electron_points": [np.array([0.1, p, 0.05]) for p in pe],
        "electron_weights": we,
        "xi2": lambda p: math.exp(-(np.linalg.norm(p) - 0.8) ** 2),
        "xi1": lambda p: math.exp(-(np.linalg.norm(p) - 0.7) ** 2),
    }


def test_psi_int_smeared_pairing_converges_under_refinement():
    phi = gaussian_test(width=1.5)
    vals = [ad.psi_int_smeared_pairing(psi_int_refinement_grids(n), phi, 1.0)
            for n in (50, 100, 200)]
    rel1 = abs(vals[1] - vals[0]) / abs(vals[1])
    rel2 = abs(vals[2] - vals[1]) / abs(vals[2])
    assert rel1 < 1e-3 and rel2 < 1e-3


def test_ir_probe_inverse_square_slope():
    # kernel 1/|p'|^2 on a ball: cutoff norm 1/lambda - 1, so the fitted
    # exponent over small cutoffs recovers 1 (closed-form radial integral)
    radii = np.geomspace(1e-5, 1.0, 600)
    edges = np.sqrt(radii[1:] * radii[:-1])
    edges = np.concatenate([[1e-5], edges, [1.0]])
    wts = radii ** 2 * np.diff(edges)
    vals = 1.0 / radii ** 4
    cutoffs = [0.03, 0.01, 0.003, 0.001, 0.0003]
    probe = ir_l2_probe(vals, radii, wts, cutoffs)
    assert abs(probe["growth_exponent"] - 1.0) < 0.02
    for lam, norm in zip(probe["cutoffs"], probe["norms"]):
        assert abs(norm - (1.0 / lam - 1.0)) < 0.05 / lam


def test_ir_probe_bounded_kernel():
    radii = np.geomspace(1e-4, 1.0, 300)
    edges = np.sqrt(radii[1:] * radii[:-1])
    edges = np.concatenate([[1e-4], edges, [1.0]])
    wts = radii ** 2 * np.diff(edges)
    probe = ir_l2_probe(np.exp(-radii ** 2), radii, wts,
                        [0.3, 0.1, 0.03, 0.01])
    assert abs(probe["growth_exponent"]) < 0.02


def test_ir_probe_psi_int_kernel_grows():
    phi = gaussian_test(width=1.5)
    m = 1.0
    radii = np.geomspace(1e-4, 1.5, 240)
    edges = np.sqrt(radii[1:] * radii[:-1])
    edges = np.concatenate([[1e-4], edges, [1.5]])
    wts = radii ** 2 * np.diff(edges)
    pe = np.array([0.4, 0.1, 0.2])
    vals = np.array([abs(psi_int_first_order_kernel(
        1, np.array([r, 0.0, 0.0]), 1, pe, "annihilate-annihilate",
        phi, m)) ** 2 for r in radii])
    probe = ir_l2_probe(vals, radii, wts, [0.3, 0.1, 0.03, 0.01, 0.003])
    assert probe["growth_exponent"] > 0.5


def test_classify_contribution():
    assert classify_contribution([1.0, 1.01, 1.015]) == "B"
    assert classify_contribution([1.0, 3.0, 9.5]) == "A"
    with pytest.raises(AdiabaticError):
        classify_contribution([1.0])


def test_decompose_delta():
    test = GaussianTest1D(0.4, 0.8)
    desc = {"kind": "function",
            "fourier": lambda chi: 1.0 / math.sqrt(2 * math.pi)}
    val = decompose_1d(desc, test)
    assert abs(val - test.value_1d(0.0)) < 1e-10


def test_decompose_gaussian_two_routes(rng):
    # 50 random gaussian pairs: spectral route equals direct quadrature
    for _ in range(50):
        tc, tw = rng.uniform(-1, 1), rng.uniform(0.4, 1.4)
        fc, fw = rng.uniform(-1, 1), rng.uniform(0.4, 1.4)
        test = GaussianTest1D(tc, tw)
        fpos = GaussianTest1D(fc, fw)
        desc = {"kind": "function",
                "fourier": lambda chi, fp=fpos:
                    fp.fourier_1d(-chi) / math.sqrt(2 * math.pi)}
        spectral = decompose_1d(desc, test)
        direct = direct_pairing_1d(fpos.value_1d, test, lo=-15, hi=15)
        assert abs(spectral - direct) < 1e-10


def test_decompose_measure_atoms():
    # Fhat a pure point measure: F(t) = sum a_j e^{i chi_j t}/sqrt(2pi)
    test = GaussianTest1D(0.2, 0.9)
    atoms = [(0.7, 1.0 + 0j), (-1.3, 0.5j)]
    desc = {"kind": "measure", "atoms": atoms, "density": None}
    spectral = decompose_1d(desc, test)

    def fpos(t):
        return sum(a * np.exp(1j * chi * t) for chi, a in atoms) \
            / math.sqrt(2 * math.pi)

    direct = direct_pairing_1d(fpos, test, lo=-15, hi=15)
    assert abs(spectral - direct) < 1e-10


def test_decompose_refuses_non_measure():
    test = GaussianTest1D(0.0, 1.0)
    with pytest.raises(DecompositionError):
        decompose_1d({"kind": "neither"}, test)
