"""Plane-wave kernels of the free e.m. potential and Dirac fields.

Conventions (natural units):
  * metric g = diag(1, -1, -1, -1),
  * chiral gamma matrices,
  * momentum-space test functions phit(P) = int e^{+iP.x} phi(x) d4x, so
    an annihilation-part kernel e^{-ip.x} smears to phit(-p) and a
    creation part to phit(+p),
  * kernel normalization (2pi)^{-3/2}, with (2 p0)^{-1/2} for bosons.

The Dirac species uses four spin labels: 1, 2 are particle modes (u
spinors, annihilation part), 3, 4 antiparticle modes (v spinors, creation
part).  The conjugate field shares the species and swaps the roles.
"""

import numpy as np

from .grids import Species

TWO_PI_32 = (2 * np.pi) ** (-1.5)

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

_I2 = np.eye(2, dtype=complex)
_Z2 = np.zeros((2, 2), dtype=complex)

GAMMA = (
    np.block([[_Z2, _I2], [_I2, _Z2]]),
    np.block([[_Z2, -PAULI[0]], [PAULI[0], _Z2]]),
    np.block([[_Z2, -PAULI[1]], [PAULI[1], _Z2]]),
    np.block([[_Z2, -PAULI[2]], [PAULI[2], _Z2]]),
)

METRIC = np.diag([1.0, -1.0, -1.0, -1.0])


class FieldError(ValueError):
    pass


def slash(p4):
    """gamma^mu p_mu for a 4-vector (p0, p)."""
    p4 = np.asarray(p4)
    return (GAMMA[0] * p4[0] - GAMMA[1] * p4[1]
            - GAMMA[2] * p4[2] - GAMMA[3] * p4[3])


def energy(p, m):
    p = np.asarray(p, dtype=float)
    return np.sqrt(np.sum(p * p, axis=-1) + m * m)


def _chi(s):
    chi = np.zeros(2, dtype=complex)
    chi[s - 1] = 1.0
    return chi


def u_spinor(s, p, m):
    """Positive-energy Dirac solution, s in {1, 2}; unit norm u+u = 1."""
    p = np.asarray(p, dtype=float)
    E = energy(p, m)
    if E == 0:
        raise FieldError("u_spinor is singular at m = 0, p = 0")
    chi = _chi(s)
    ps = sum(p[i] * PAULI[i] for i in range(3))
    a = (ps @ chi) / (E + m)
    pref = (1 / np.sqrt(2)) * np.sqrt((E + m) / (2 * E))
    return pref * np.concatenate([chi + a, chi - a])


def v_spinor(s, p, m):
    """Negative-energy solution; lower block sign flipped relative to u."""
    p = np.asarray(p, dtype=float)
    E = energy(p, m)
    if E == 0:
        raise FieldError("v_spinor is singular at m = 0, p = 0")
    chi = _chi(s)
    ps = sum(p[i] * PAULI[i] for i in range(3))
    a = (ps @ chi) / (E + m)
    pref = (1 / np.sqrt(2)) * np.sqrt((E + m) / (2 * E))
    return pref * np.concatenate([chi + a, -(chi - a)])


def dirac_adjoint(spinor):
    """u^sharp = u^dagger gamma^0."""
    return np.conj(spinor) @ GAMMA[0]


def spin_sum_projector(p, m):
    """sum_s u_s u_s^dagger gamma^0 = (gamma.p + m) / (2E)."""
    E = energy(p, m)
    return (slash(np.concatenate([[E], np.asarray(p, float)])) +
            m * np.eye(4)) / (2 * E)


def em_kernel(nu, p, mu, x, mode, epsilon=0.0):
    """Plane-wave kernel of the e.m. potential in the Gupta-Bleuler gauge.

    g_{nu mu} (2pi)^{-3/2} (2 p0)^{-1/2} e^{-+ i p.x}, with p0 = |p| for
    epsilon = 0 and sqrt(|p|^2 + eps^2) otherwise.  mode 'annihilate'
    carries e^{-ip.x}, 'create' e^{+ip.x}.
    """
    p = np.asarray(p, dtype=float)
    r = np.linalg.norm(p)
    p0 = np.sqrt(r * r + epsilon * epsilon)
    if p0 == 0:
        raise FieldError("massless e.m. kernel is singular at p = 0 "
                         "(no epsilon regularization supplied)")
    if mode not in ("annihilate", "create"):
        raise FieldError(f"unknown mode {mode!r}")
    sign = -1.0 if mode == "annihilate" else 1.0
    phase = np.exp(sign * 1j * (p0 * x[0] - p @ np.asarray(x[1:], float)))
    return METRIC[nu, mu] * TWO_PI_32 * phase / np.sqrt(2 * p0)


def dirac_kernel(s, p, a, x, mode, m):
    """Plane-wave kernel of the free Dirac field, spin labels 1..4.

    The annihilation kernel vanishes on s in {3,4}, the creation kernel
    on s in {1,2}.
    """
    p = np.asarray(p, dtype=float)
    E = energy(p, m)
    if mode == "annihilate":
        if s in (3, 4):
            return 0j
        spin = u_spinor(s, p, m)
        sign = -1.0
    elif mode == "create":
        if s in (1, 2):
            return 0j
        spin = v_spinor(s - 2, p, m)
        sign = 1.0
    else:
        raise FieldError(f"unknown mode {mode!r}")
    phase = np.exp(sign * 1j * (E * x[0] - p @ np.asarray(x[1:], float)))
    return TWO_PI_32 * spin[a] * phase


def classify_kernel_regularity(species: Species, test):
    """'regular' when the smeared kernels stay in the test space: massive
    species always; massless only against transforms vanishing to all
    orders at zero frequency."""
    if species.mass > 0:
        return "regular"
    if getattr(test, "vanishes_at_zero", False) and test.check_vanishing():
        return "regular"
    return "dual-valued"


# ---------------------------------------------------------------------------
# coefficient tables on flattened (spin, point) indices, for kernel assembly

KIND_SCALAR = "scalar"
KIND_VECTOR = "vector"
KIND_DIRAC = "dirac"
KIND_DIRAC_CONJ = "dirac_conjugate"

N_COMPONENTS = {KIND_SCALAR: 1, KIND_VECTOR: 4, KIND_DIRAC: 4,
                KIND_DIRAC_CONJ: 4}


def field_coefficients(species: Species, kind, part):
    """(n_components, species.dim) coefficient table of one field part.

    part is 'create' or 'annihilate'.  Zero rows encode the vanishing
    branches (wrong-spin Dirac labels).
    """
    p0 = species.p0()
    n = species.n_points
    dim = species.dim
    if kind == KIND_SCALAR:
        if species.n_spins != 1:
            raise FieldError("scalar species must have one spin label")
        coeff = TWO_PI_32 / np.sqrt(2 * p0)
        return np.tile(coeff, (1, species.n_spins)).reshape(1, dim)
    if kind == KIND_VECTOR:
        if species.n_spins != 4:
            raise FieldError("vector species must have 4 polarization labels")
        out = np.zeros((4, dim), dtype=complex)
        base = TWO_PI_32 / np.sqrt(2 * p0)
        for si, pol in enumerate(species.spins):
            mu = int(pol)
            out[mu, si * n:(si + 1) * n] = METRIC[mu, mu] * base
        return out
    if kind in (KIND_DIRAC, KIND_DIRAC_CONJ):
        if tuple(species.spins) != (1, 2, 3, 4):
            raise FieldError("Dirac species must carry spin labels (1,2,3,4)")
        out = np.zeros((4, dim), dtype=complex)
        for si, s in enumerate(species.spins):
            for pi in range(n):
                p = species.points[pi]
                col = si * n + pi
                if kind == KIND_DIRAC:
                    if part == "annihilate" and s in (1, 2):
                        out[:, col] = TWO_PI_32 * u_spinor(s, p, species.mass)
                    elif part == "create" and s in (3, 4):
                        out[:, col] = TWO_PI_32 * v_spinor(s - 2, p, species.mass)
                else:
                    if part == "create" and s in (1, 2):
                        out[:, col] = TWO_PI_32 * dirac_adjoint(
                            u_spinor(s, p, species.mass))
                    elif part == "annihilate" and s in (3, 4):
                        out[:, col] = TWO_PI_32 * dirac_adjoint(
                            v_spinor(s - 2, p, species.mass))
        return out
    raise FieldError(f"unknown field kind {kind!r}")


def flat_four_momenta(species: Species):
    """(species.dim, 4) on-shell momenta on the flattened index."""
    p4 = species.four_momenta()
    return np.tile(p4, (species.n_spins, 1))
