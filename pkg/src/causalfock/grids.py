"""Discretized spin-momentum single-particle spaces.

A grid holds one or more particle species.  Each species carries a finite
set of spin labels, a set of 3-momentum sample points with strictly
positive quadrature weights, Bose/Fermi statistics, a mass and a
dispersion rule.  Discrete sums against the weights stand in for the
momentum integrals, so a point mass ``delta_{s,p}`` is represented by the
indicator at the point divided by its weight (grid refinement then
reproduces continuum pairings).

The species order inside a grid is fixed and global: all fermionic sign
conventions downstream are computed against it.
"""

from dataclasses import dataclass
import json

import numpy as np

BOSE = "bose"
FERMI = "fermi"

DISPERSION_MASSIVE = "massive"    # p0 = sqrt(|p|^2 + m^2)
DISPERSION_MASSLESS = "massless"  # p0 = |p|
DISPERSION_EPS = "eps"            # p0 = sqrt(|p|^2 + eps^2)


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Species:
    name: str
    statistics: str
    mass: float
    spins: tuple
    points: np.ndarray          # (n_points, 3)
    weights: np.ndarray         # (n_points,), > 0
    dispersion: str = DISPERSION_MASSIVE
    epsilon: float = 0.0

    def __eq__(self, other):
        if not isinstance(other, Species):
            return NotImplemented
        return (self.name == other.name
                and self.statistics == other.statistics
                and self.mass == other.mass
                and self.spins == other.spins
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights)
                and self.dispersion == other.dispersion
                and self.epsilon == other.epsilon)

    def __hash__(self):
        return hash((self.name, self.statistics, self.mass, self.spins,
                     self.dispersion, self.epsilon, self.points.shape))

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "spins", tuple(self.spins))
        if self.statistics not in (BOSE, FERMI):
            raise GridError(f"unknown statistics {self.statistics!r}")
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise GridError("momentum points must be an (n, 3) array")
        if self.points.shape[0] != self.weights.shape[0]:
            raise GridError("points/weights length mismatch")
        if np.any(self.weights <= 0):
            raise GridError("quadrature weights must be strictly positive")
        if self.mass < 0:
            raise GridError("mass must be >= 0")
        keys = {tuple(np.round(p, 12)) for p in self.points}
        if len(keys) != len(self.points):
            raise GridError(f"species {self.name!r} has duplicate momentum points")
        if self.dispersion not in (DISPERSION_MASSIVE, DISPERSION_MASSLESS,
                                   DISPERSION_EPS):
            raise GridError(f"unknown dispersion rule {self.dispersion!r}")
        if self.dispersion == DISPERSION_EPS and self.epsilon <= 0:
            raise GridError("eps dispersion requires epsilon > 0")
        if self.dispersion == DISPERSION_MASSLESS and self.mass != 0:
            raise GridError("massless dispersion requires mass = 0")
        if (self.dispersion == DISPERSION_MASSLESS
                and np.any(np.linalg.norm(self.points, axis=1) == 0)):
            raise GridError("massless species may not contain the origin p = 0")

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def n_spins(self):
        return len(self.spins)

    @property
    def dim(self):
        """Flattened single-particle dimension, spin-major."""
        return self.n_spins * self.n_points

    @property
    def is_fermi(self):
        return self.statistics == FERMI

    def p0(self, points=None):
        """Energy p0 of the sample points under the dispersion rule."""
        p = self.points if points is None else np.asarray(points, dtype=float)
        r2 = np.sum(p * p, axis=-1)
        if self.dispersion == DISPERSION_MASSIVE:
            return np.sqrt(r2 + self.mass ** 2)
        if self.dispersion == DISPERSION_MASSLESS:
            return np.sqrt(r2)
        return np.sqrt(r2 + self.epsilon ** 2)

    def flat_weights(self):
        """Weights on the flattened (spin, point) index, spin-major.

        Spin sums carry unit weight; only the momentum quadrature is
        weighted.
        """
        return np.tile(self.weights, self.n_spins)

    def flat_index(self, spin, point_index):
        return self.spins.index(spin) * self.n_points + point_index

    def four_momenta(self):
        """(n_points, 4) on-shell momenta (p0, p)."""
        return np.concatenate([self.p0()[:, None], self.points], axis=1)


@dataclass(frozen=True, eq=False)
class SpinMomentumGrid:
    species: tuple

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise GridError("duplicate species names")

    def __eq__(self, other):
        if not isinstance(other, SpinMomentumGrid):
            return NotImplemented
        return self.species == other.species

    def __hash__(self):
        return hash(self.species)

    @property
    def n_species(self):
        return len(self.species)

    def index(self, name):
        for i, s in enumerate(self.species):
            if s.name == name:
                return i
        raise GridError(f"no species named {name!r}")

    def __getitem__(self, name):
        return self.species[self.index(name)]

    def to_json(self):
        out = {"species": []}
        for s in self.species:
            entry = {
                "name": s.name,
                "statistics": s.statistics,
                "mass": s.mass,
                "spins": list(s.spins),
                "momentum_points": s.points.tolist(),
                "weights": s.weights.tolist(),
                "dispersion": s.dispersion,
            }
            if s.dispersion == DISPERSION_EPS:
                entry["epsilon"] = s.epsilon
            out["species"].append(entry)
        return out

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        species = []
        for e in doc["species"]:
            mass = float(e["mass"])
            dispersion = e.get(
                "dispersion",
                DISPERSION_MASSIVE if mass > 0 else DISPERSION_MASSLESS)
            species.append(Species(
                name=e["name"],
                statistics=e["statistics"].lower(),
                mass=mass,
                spins=tuple(e["spins"]),
                points=np.asarray(e["momentum_points"], dtype=float),
                weights=np.asarray(e["weights"], dtype=float),
                dispersion=dispersion,
                epsilon=float(e.get("epsilon", 0.0)),
            ))
        return cls(tuple(species))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def delta_argument(species, spin, point_index):
    """Grid representation of the point mass delta_{s,p}: indicator/weight."""
    w = np.zeros(species.dim, dtype=complex)
    w[species.flat_index(spin, point_index)] = 1.0 / species.weights[point_index]
    return w


def line_momenta(values, axis=0):
    """Momenta along one axis, for 1D toy grids."""
    pts = np.zeros((len(values), 3))
    pts[:, axis] = values
    return pts


def fibonacci_directions(n):
    """n quasi-uniform unit vectors on the sphere (golden-angle lattice)."""
    i = np.arange(n) + 0.5
    phi = np.pi * (1 + 5 ** 0.5) * i
    cth = 1 - 2 * i / n
    sth = np.sqrt(1 - cth ** 2)
    return np.stack([sth * np.cos(phi), sth * np.sin(phi), cth], axis=1)


def spherical_points(n_radial, n_directions, r_min, r_max, stagger=0.5):
    """Product grid of radial shells and Fibonacci directions.

    The radial rule is midpoint with an adjustable stagger in (0, 1);
    two grids with staggers 0.25/0.75 share no radius, which keeps
    pairwise momentum differences away from exact zero.  Never emits the
    origin.
    """
    if not 0 < stagger < 1:
        raise GridError("stagger must lie strictly between 0 and 1")
    dr = (r_max - r_min) / n_radial
    radii = r_min + (np.arange(n_radial) + stagger) * dr
    dirs = fibonacci_directions(n_directions)
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    wts = np.repeat(radii ** 2 * dr, n_directions) * (4 * np.pi / n_directions)
    return pts, wts
