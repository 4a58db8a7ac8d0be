"""Space-time test functions, represented through their 4D Fourier
transforms as closed-form Gaussian-times-polynomial families.

The optional ``vanishes_at_zero`` flag multiplies the transform by
exp(-scale^2/|P|^2), which kills the value and every derivative at zero
frequency while staying smooth elsewhere; this models membership in the
test class required by massless kernels.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TestFunctionSpec:
    """4D test function given by its momentum-space transform.

    fourier(P) = poly(P) * exp(-|P - center|^2 / (2 width^2))
                 [* exp(-vanish_scale^2 / |P|^2) if vanishes_at_zero]

    with Euclidean norms on the 4-component argument.  ``poly`` is a list
    of (coefficient, (k0, k1, k2, k3)) monomial terms; empty means the
    constant 1.
    """
    center: tuple = (0.0, 0.0, 0.0, 0.0)
    width: float = 1.0
    poly: tuple = ()
    vanishes_at_zero: bool = False
    vanish_scale: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 4:
            raise ValueError("center must be a 4-vector")
        if self.width <= 0:
            raise ValueError("width must be positive")

    def fourier(self, P):
        """Evaluate the transform at P with shape (..., 4)."""
        P = np.asarray(P, dtype=float)
        if P.shape[-1] != 4:
            raise ValueError("P must have a trailing dimension of 4")
        c = np.asarray(self.center)
        d2 = np.sum((P - c) ** 2, axis=-1)
        val = np.exp(-d2 / (2 * self.width ** 2)).astype(complex)
        if self.poly:
            acc = np.zeros_like(val)
            for coeff, powers in self.poly:
                term = np.full(P.shape[:-1], complex(coeff))
                for ax, k in enumerate(powers):
                    if k:
                        term = term * P[..., ax] ** k
                acc = acc + term
            val = val * acc
        if self.vanishes_at_zero:
            n2 = np.sum(P ** 2, axis=-1)
            damp = np.zeros_like(n2)
            nz = n2 > 0
            damp[nz] = np.exp(-self.vanish_scale ** 2 / n2[nz])
            val = val * damp
        if val.ndim == 0:
            return complex(val)
        return val

    def fourier_derivative_at_zero(self, axis, order=1, h=1e-3):
        """Central finite-difference derivative of the transform at P=0."""
        stencils = {
            0: ([0.0], [1.0]),
            1: ([-h, h], [-0.5 / h, 0.5 / h]),
            2: ([-h, 0.0, h], [1 / h ** 2, -2 / h ** 2, 1 / h ** 2]),
        }
        if order not in stencils:
            raise ValueError("orders 0..2 supported")
        nodes, coeffs = stencils[order]
        total = 0j
        for x, c in zip(nodes, coeffs):
            P = np.zeros(4)
            P[axis] = x
            total += c * self.fourier(P)
        return total

    def check_vanishing(self, tol=1e-12, orders=(0, 1, 2)):
        """Verify the flag's contract: value and requested derivatives at
        zero below tol."""
        if not self.vanishes_at_zero:
            return True
        for order in orders:
            for axis in range(4):
                if abs(self.fourier_derivative_at_zero(axis, order)) > tol:
                    return False
        return True


def gaussian_test(center=(0, 0, 0, 0), width=1.0):
    return TestFunctionSpec(center=center, width=width)


def vanishing_test(center=(0, 0, 0, 0), width=1.0, scale=0.5):
    return TestFunctionSpec(center=center, width=width,
                            vanishes_at_zero=True, vanish_scale=scale)
