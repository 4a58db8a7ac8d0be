"""Truncated Fock space over a discretized single-particle grid.

States are graded by per-species occupation numbers.  A sector with
occupation ``(n_1, .., n_S)`` stores a complex array with ``n_1`` axes of
the first species' flattened (spin, point) dimension, then ``n_2`` axes
of the second, and so on; each species block is symmetric (Bose) or
antisymmetric (Fermi) under exchange of its own axes.  The total particle
number is capped at ``n_max``; operators that would populate the sector
above the cap silently truncate but record the loss.

Creation/annihilation act in the white-noise normalization

    a(w)  : sector n -> n-1,   n * (wbar contracted into the first slot),
    a(w)+ : sector n -> n+1,   symmetrized insertion of w,

where the contraction carries the quadrature weights.  Evaluating at the
discrete delta  delta_{s,p} = indicator/weight  yields the
sharp-point operators with

    [a_p, a_q^+]_{-+} = delta_{pq} / weight(p).

The duality pairing used throughout is

    <<X, Psi>> = sum over sectors  (prod_s n_s!) * sum_idx (prod weights)
                 * X[idx] * conj(Psi[idx]),

linear in the first argument and conjugate-linear in the second; a(w) and
a(w)+ are mutually adjoint under it.  Fermionic cross-species signs are
computed against the grid's species order.
"""

import itertools
import json
import math

import numpy as np

from .grids import GridError, SpinMomentumGrid

SYM_TOL = 1e-12


class FockError(ValueError):
    pass


def _occupations(n_species, n_max):
    """All occupation tuples with total <= n_max, lexicographic."""
    out = []
    for total in range(n_max + 1):
        for occ in itertools.product(range(total + 1), repeat=n_species):
            if sum(occ) == total:
                out.append(occ)
    return out


def _block_slices(occ):
    """Axis ranges of each species block inside a sector array."""
    slices, start = [], 0
    for n in occ:
        slices.append(range(start, start + n))
        start += n
    return slices


def symmetrize_sector(arr, occ, fermi_flags):
    """Project a sector array onto its graded symmetry class.

    Averages over all permutations within each species block, signed for
    Fermi species.  Idempotent.
    """
    out = arr
    for s, axes in enumerate(_block_slices(occ)):
        n = occ[s]
        if n < 2:
            continue
        axes = list(axes)
        acc = np.zeros_like(arr)
        for perm in itertools.permutations(range(n)):
            sign = 1.0
            if fermi_flags[s]:
                sign = _perm_sign(perm)
            axis_map = list(range(arr.ndim))
            for a, b in zip(axes, perm):
                axis_map[a] = axes[b]
            acc += sign * np.transpose(out, axis_map)
        out = acc / math.factorial(n)
    return out


def _perm_sign(perm):
    sign = 1.0
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


class FockVector:
    """Truncated graded Fock state.

    ``sectors`` maps occupation tuples to complex arrays; absent keys are
    zero.  Instances are treated as immutable after construction.
    """

    def __init__(self, grid: SpinMomentumGrid, n_max: int, sectors=None,
                 check=False):
        if n_max < 0:
            raise FockError("n_max must be >= 0")
        self.grid = grid
        self.n_max = int(n_max)
        self.sectors = {}
        self.truncation_loss = 0.0
        self.truncated_writes = 0
        dims = [s.dim for s in grid.species]
        if sectors:
            for occ, arr in sectors.items():
                occ = tuple(int(n) for n in occ)
                if sum(occ) > n_max:
                    raise FockError(f"sector {occ} exceeds n_max={n_max}")
                shape = tuple(d for d, n in zip(dims, occ) for _ in range(n))
                arr = np.asarray(arr, dtype=complex).reshape(shape)
                self.sectors[occ] = arr
        if check:
            self.check_symmetry()

    def check_symmetry(self, tol=SYM_TOL):
        flags = [s.is_fermi for s in self.grid.species]
        for occ, arr in self.sectors.items():
            sym = symmetrize_sector(arr, occ, flags)
            err = np.max(np.abs(arr - sym)) if arr.size else 0.0
            if err > tol:
                raise FockError(
                    f"sector {occ} violates its symmetry class by {err:.3e}")

    def sector(self, occ):
        occ = tuple(occ)
        if occ in self.sectors:
            return self.sectors[occ]
        dims = [s.dim for s in self.grid.species]
        shape = tuple(d for d, n in zip(dims, occ) for _ in range(n))
        return np.zeros(shape, dtype=complex)

    def copy(self):
        return FockVector(self.grid, self.n_max,
                          {o: a.copy() for o, a in self.sectors.items()})

    def __add__(self, other):
        if other.grid is not self.grid and other.grid != self.grid:
            raise FockError("grid mismatch in FockVector addition")
        n_max = max(self.n_max, other.n_max)
        occs = set(self.sectors) | set(other.sectors)
        return FockVector(self.grid, n_max,
                          {o: self.sector(o) + other.sector(o) for o in occs})

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, c):
        return FockVector(self.grid, self.n_max,
                          {o: c * a for o, a in self.sectors.items()})

    def norm2(self):
        return fock_inner(self, self).real

    def to_json(self):
        doc = {"n_max": self.n_max, "sectors": {}}
        for occ, arr in sorted(self.sectors.items()):
            flat = arr.reshape(-1)
            doc["sectors"][",".join(map(str, occ))] = {
                "shape": list(arr.shape),
                "data": [[float(z.real), float(z.imag)] for z in flat],
            }
        return doc

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)

    @classmethod
    def from_json(cls, grid, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        sectors = {}
        for key, entry in doc["sectors"].items():
            occ = tuple(int(x) for x in key.split(",")) if key else ()
            data = np.array([complex(re, im) for re, im in entry["data"]])
            sectors[occ] = data.reshape(entry["shape"])
        return cls(grid, doc["n_max"], sectors)

    @classmethod
    def load(cls, grid, path):
        with open(path) as fh:
            return cls.from_json(grid, json.load(fh))


def vacuum(grid, n_max):
    zeros = tuple(0 for _ in grid.species)
    return FockVector(grid, n_max, {zeros: np.array(1.0 + 0j)})


def one_particle(grid, species_name, amplitudes, n_max=1):
    """State with a single particle of one species, given flat amplitudes."""
    i = grid.index(species_name)
    occ = tuple(1 if j == i else 0 for j in range(grid.n_species))
    arr = np.asarray(amplitudes, dtype=complex)
    if arr.shape != (grid.species[i].dim,):
        raise FockError("amplitude length does not match species dimension")
    return FockVector(grid, n_max, {occ: arr})


def random_state(grid, n_max, rng, scale=1.0):
    """Seeded random state with correctly symmetrized sectors."""
    flags = [s.is_fermi for s in grid.species]
    dims = [s.dim for s in grid.species]
    sectors = {}
    for occ in _occupations(grid.n_species, n_max):
        shape = tuple(d for d, n in zip(dims, occ) for _ in range(n))
        arr = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        sectors[occ] = scale * symmetrize_sector(arr, occ, flags)
    return FockVector(grid, n_max, sectors)


def fock_inner(x: FockVector, y: FockVector):
    """<<x, y>>: linear in x, conjugate-linear in y, weighted, with the
    per-species n! sector factors."""
    if x.grid != y.grid:
        raise FockError("grid mismatch in inner product")
    total = 0.0 + 0j
    wvecs = [s.flat_weights() for s in x.grid.species]
    for occ in set(x.sectors) & set(y.sectors):
        a, b = x.sectors[occ], y.sectors[occ]
        prod = a * np.conj(b)
        axis = 0
        for s, n in enumerate(occ):
            for _ in range(n):
                prod = np.tensordot(wvecs[s], prod, axes=([0], [axis]))
        fact = 1.0
        for n in occ:
            fact *= math.factorial(n)
        total += fact * prod
    return complex(total)


def _cross_sign(grid, species_index, occ):
    """Fermionic sign for moving an operator of one species past the
    occupied fermionic modes of all earlier species."""
    if not grid.species[species_index].is_fermi:
        return 1.0
    crossings = sum(occ[s] for s in range(species_index)
                    if grid.species[s].is_fermi)
    return -1.0 if crossings % 2 else 1.0


def a_apply(grid, species_name, w, phi: FockVector) -> FockVector:
    """Annihilation a(w): sector n -> n * (wbar contracted into the first
    slot of the species block), weighted."""
    si = grid.index(species_name)
    sp = grid.species[si]
    w = np.asarray(w, dtype=complex)
    if w.shape != (sp.dim,):
        raise GridError("smeared argument does not match the species grid")
    wconj = sp.flat_weights() * np.conj(w)
    out = {}
    for occ, arr in phi.sectors.items():
        n = occ[si]
        if n == 0:
            continue
        axis = sum(occ[:si])
        res = np.tensordot(wconj, arr, axes=([0], [axis]))
        new_occ = tuple(m - 1 if s == si else m for s, m in enumerate(occ))
        contrib = n * _cross_sign(grid, si, occ) * res
        if new_occ in out:
            out[new_occ] = out[new_occ] + contrib
        else:
            out[new_occ] = contrib
    return FockVector(phi.grid, phi.n_max, out)


def a_dagger_apply(grid, species_name, w, phi: FockVector) -> FockVector:
    """Creation a(w)+: symmetrized insertion of w into the species block.

    Writes into the sector above n_max are dropped; the weighted squared
    norm of the dropped part accumulates in ``truncation_loss`` on the
    result.
    """
    si = grid.index(species_name)
    sp = grid.species[si]
    w = np.asarray(w, dtype=complex)
    if w.shape != (sp.dim,):
        raise GridError("smeared argument does not match the species grid")
    out = {}
    loss = 0.0
    dropped = 0
    for occ, arr in phi.sectors.items():
        n = occ[si]
        new_occ = tuple(m + 1 if s == si else m for s, m in enumerate(occ))
        base_axis = sum(occ[:si])
        ins = np.tensordot(w, arr, axes=0)
        ins = np.moveaxis(ins, 0, base_axis)
        if sum(new_occ) > phi.n_max:
            # loss gauged on the raw insertion (upper bound)
            tmp = FockVector(grid, sum(new_occ), {new_occ: ins})
            loss += tmp.norm2()
            dropped += 1
            continue
        # rest of the block is already symmetric: averaging the new axis
        # over the n+1 block positions completes the projection
        acc = np.zeros_like(ins)
        sign = -1.0 if sp.is_fermi else 1.0
        for j in range(n + 1):
            acc += (sign ** j) * np.moveaxis(ins, base_axis, base_axis + j)
        res = _cross_sign(grid, si, occ) * acc / (n + 1)
        if new_occ in out:
            out[new_occ] = out[new_occ] + res
        else:
            out[new_occ] = res
    result = FockVector(phi.grid, phi.n_max, out)
    result.truncation_loss = loss
    result.truncated_writes = dropped
    return result


def point_annihilate(grid, species_name, spin, point_index, phi):
    """a_{s,p}: annihilation at a sharp grid point (delta convention)."""
    from .grids import delta_argument
    sp = grid[species_name]
    return a_apply(grid, species_name,
                   delta_argument(sp, spin, point_index), phi)


def point_create(grid, species_name, spin, point_index, phi):
    from .grids import delta_argument
    sp = grid[species_name]
    return a_dagger_apply(grid, species_name,
                          delta_argument(sp, spin, point_index), phi)


def commutator_check(grid, species_name, p_index, q_index, n_max,
                     spin=None, seed=7):
    """Matrix element of [a_p, a_q^+]_{-+} on a fixed probe state.

    Returns ``<<probe, comm probe>> / <<probe, probe>>``; equals
    delta_{pq}/weight(p) for either statistics.  The probe omits the top
    sector, where truncation would corrupt the a a+ term.
    """
    sp = grid[species_name]
    if spin is None:
        spin = sp.spins[0]
    rng = np.random.default_rng(seed)
    probe = random_state(grid, max(n_max - 1, 0), rng)
    probe.n_max = n_max
    term1 = point_annihilate(grid, species_name, spin, p_index,
                             point_create(grid, species_name, spin, q_index, probe))
    term2 = point_create(grid, species_name, spin, q_index,
                         point_annihilate(grid, species_name, spin, p_index, probe))
    commuted = term1 + term2 if sp.is_fermi else term1 - term2
    return fock_inner(commuted, probe) / fock_inner(probe, probe)


class KreinMetric:
    """Diagonal Fock-space metric from per-spin signs.

    Signs live on the spin labels of each species (single-particle level)
    and lift multiplicatively to sectors.  eta^2 = identity.
    """

    def __init__(self, grid, spin_signs):
        self.grid = grid
        self.spin_signs = {}
        for sp in grid.species:
            signs = spin_signs.get(sp.name, {s: 1 for s in sp.spins})
            vec = np.array([float(signs[s]) for s in sp.spins])
            if not np.all(np.abs(vec) == 1):
                raise FockError("Krein signs must be +-1")
            self.spin_signs[sp.name] = np.repeat(vec, sp.n_points)

    @classmethod
    def gupta_bleuler(cls, grid, em_species="em", temporal_spin=0):
        """e.m. potential: temporal polarization -1, spatial +1; all other
        species +1."""
        signs = {}
        for sp in grid.species:
            if sp.name == em_species:
                signs[sp.name] = {s: (-1 if s == temporal_spin else 1)
                                  for s in sp.spins}
            else:
                signs[sp.name] = {s: 1 for s in sp.spins}
        return cls(grid, signs)

    def apply(self, phi: FockVector) -> FockVector:
        out = {}
        for occ, arr in phi.sectors.items():
            res = arr.copy()
            axis = 0
            for s, n in enumerate(occ):
                vec = self.spin_signs[phi.grid.species[s].name]
                for _ in range(n):
                    shape = [1] * res.ndim
                    shape[axis] = len(vec)
                    res = res * vec.reshape(shape)
                    axis += 1
            out[occ] = res
        return FockVector(phi.grid, phi.n_max, out)

    def sign_vector(self, basis):
        """Diagonal of eta in a FockBasis coordinate system."""
        diag = np.ones(basis.dim)
        for k, (occ, idx) in enumerate(basis.labels):
            sgn = 1.0
            pos = 0
            for s, n in enumerate(occ):
                vec = self.spin_signs[basis.grid.species[s].name]
                for _ in range(n):
                    sgn *= vec[idx[pos]]
                    pos += 1
            diag[k] = sgn
        return diag


def krein_adjoint(matrix, eta_signs):
    """eta * (conjugate transpose) * eta with a diagonal eta."""
    matrix = np.asarray(matrix)
    eta_signs = np.asarray(eta_signs, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise FockError("krein_adjoint expects a square matrix")
    if eta_signs.shape != (matrix.shape[0],):
        raise FockError("eta diagonal does not match the matrix dimension")
    return eta_signs[:, None] * matrix.conj().T * eta_signs[None, :]


class FockBasis:
    """Symmetry-reduced coordinates on the truncated space.

    One coordinate per canonical label (occupation, sorted multi-index
    per species block: non-decreasing for Bose, strictly increasing for
    Fermi); a symmetric sector array is determined by its values at the
    canonical indices.  Operators become matrices via ``matrix(op)``.
    With ``orthonormal=True`` coordinates are rescaled by the square root
    of the diagonal Gram matrix of <<.,.>>, so the plain conjugate
    transpose of a matrix is its Fock adjoint.
    """

    def __init__(self, grid, n_max, orthonormal=True):
        self.grid = grid
        self.n_max = n_max
        self.orthonormal = orthonormal
        self.fermi_flags = [s.is_fermi for s in grid.species]
        dims = [s.dim for s in grid.species]
        self.labels = []
        self.sector_slices = {}
        for occ in _occupations(grid.n_species, n_max):
            start = len(self.labels)
            block_tuples = []
            for s, n in enumerate(occ):
                if self.fermi_flags[s]:
                    block_tuples.append(
                        list(itertools.combinations(range(dims[s]), n)))
                else:
                    block_tuples.append(list(
                        itertools.combinations_with_replacement(range(dims[s]), n)))
            for combo in itertools.product(*block_tuples):
                idx = tuple(i for block in combo for i in block)
                self.labels.append((occ, idx))
            self.sector_slices[occ] = slice(start, len(self.labels))
        self.dim = len(self.labels)
        self._index = {lab: k for k, lab in enumerate(self.labels)}
        gram = np.empty(self.dim)
        wvecs = [s.flat_weights() for s in grid.species]
        for k, (occ, idx) in enumerate(self.labels):
            g = 1.0
            pos = 0
            for s, n in enumerate(occ):
                block = idx[pos:pos + n]
                pos += n
                g *= math.factorial(n)
                # number of distinct raw tuples carrying this label
                counts = {}
                for i in block:
                    counts[i] = counts.get(i, 0) + 1
                distinct = math.factorial(n)
                for c in counts.values():
                    distinct //= math.factorial(c)
                g *= distinct
                for i in block:
                    g *= wvecs[s][i]
            gram[k] = g
        self.gram = gram
        self.scale = np.sqrt(gram) if orthonormal else np.ones(self.dim)
        # vectorized gather (canonical reads) and scatter (images + signs)
        self._gather = {}
        self._scatter = []
        dims2 = [s.dim for s in grid.species]
        for occ, sl in self.sector_slices.items():
            shape = tuple(d for d, n in zip(dims2, occ) for _ in range(n))
            if sl.stop > sl.start and shape:
                idx_mat = np.array([self.labels[k][1]
                                    for k in range(sl.start, sl.stop)])
                self._gather[occ] = tuple(idx_mat.T)
            else:
                self._gather[occ] = None
            for k in range(sl.start, sl.stop):
                _o, idx = self.labels[k]
                if not shape:
                    self._scatter.append((occ, shape, None, None))
                    continue
                flats, signs = [], []
                for image, sign in _label_images(idx, occ, self.fermi_flags):
                    flats.append(np.ravel_multi_index(image, shape))
                    signs.append(sign)
                self._scatter.append((occ, shape, np.array(flats),
                                      np.array(signs, dtype=complex)))
        # per-sector projection gather: canonical coords of the symmetrized
        # image of a raw array, v[T] = (1/prod n_s!) sum_perms sgn X[perm(T)]
        # = sum over distinct images of coef * X[image]
        self._proj = {}
        for occ, sl in self.sector_slices.items():
            rows = []
            for k in range(sl.start, sl.stop):
                _o, shape, flats, signs = self._scatter[k]
                if flats is None:
                    rows.append((None, None))
                    continue
                idx = self.labels[k][1]
                mult = 1.0
                pos = 0
                for s, n in enumerate(occ):
                    block = idx[pos:pos + n]
                    pos += n
                    counts = {}
                    for i in block:
                        counts[i] = counts.get(i, 0) + 1
                    blockmult = 1.0
                    for c in counts.values():
                        blockmult *= math.factorial(c)
                    mult *= blockmult / math.factorial(n)
                rows.append((flats, mult * signs))
            if rows and rows[0][0] is not None:
                offsets = np.cumsum([0] + [len(f) for f, _c in rows])[:-1]
                cat_flats = np.concatenate([f for f, _c in rows])
                cat_coefs = np.concatenate([c for _f, c in rows])
                self._proj[occ] = (offsets, cat_flats, cat_coefs)
            else:
                self._proj[occ] = None

    def coords_raw(self, sector_arrays):
        """Canonical coordinates of the symmetrized image of raw sector
        arrays (a dict occ -> array, not necessarily symmetric)."""
        v = np.zeros(self.dim, dtype=complex)
        for occ, arr in sector_arrays.items():
            if sum(occ) > self.n_max:
                continue
            sl = self.sector_slices[occ]
            proj = self._proj[occ]
            if proj is None:
                if sl.stop > sl.start:
                    v[sl.start] = complex(arr)
                continue
            offsets, flats, coefs = proj
            vals = coefs * arr.reshape(-1)[flats]
            v[sl] = np.add.reduceat(vals, offsets) if len(offsets) else 0.0
        return v * self.scale

    def sector_batch(self, occ, start=0, stop=None):
        """Canonical basis vectors [start:stop) of one sector as a raw
        array of shape sector_shape + (n_selected,), columns in label
        order.  Chunk to keep memory flat on large sectors."""
        sl = self.sector_slices[occ]
        n_total = sl.stop - sl.start
        stop = n_total if stop is None else min(stop, n_total)
        n = stop - start
        dims = [s.dim for s in self.grid.species]
        shape = tuple(d for d, m in zip(dims, occ) for _ in range(m))
        if not shape:
            return (np.ones((n,), dtype=complex)
                    / self.scale[sl.start + start:sl.start + stop])
        size = int(np.prod(shape))
        x = np.zeros((size, n), dtype=complex)
        for j, k in enumerate(range(sl.start + start, sl.start + stop)):
            _o, _sh, flats, signs = self._scatter[k]
            x[flats, j] = signs / self.scale[k]
        return x.reshape(shape + (n,))

    def project_batch(self, sector_arrays, n_batch):
        """Batched coords_raw: arrays carry a trailing batch axis; returns
        a (dim, n_batch) coordinate matrix."""
        v = np.zeros((self.dim, n_batch), dtype=complex)
        for occ, arr in sector_arrays.items():
            if sum(occ) > self.n_max:
                continue
            sl = self.sector_slices[occ]
            proj = self._proj[occ]
            if proj is None:
                if sl.stop > sl.start:
                    v[sl.start, :] = arr.reshape(-1)
                continue
            offsets, flats, coefs = proj
            flat = arr.reshape(-1, n_batch)
            vals = coefs[:, None] * flat[flats, :]
            v[sl, :] = np.add.reduceat(vals, offsets, axis=0)
        return v * self.scale[:, None]

    def sector_labels(self, max_total=None):
        """Indices of labels with total occupation <= max_total."""
        if max_total is None:
            return list(range(self.dim))
        return [k for k, (occ, _i) in enumerate(self.labels)
                if sum(occ) <= max_total]

    def coords(self, phi: FockVector):
        v = np.zeros(self.dim, dtype=complex)
        for occ, arr in phi.sectors.items():
            if sum(occ) > self.n_max:
                continue
            sl = self.sector_slices[occ]
            gather = self._gather[occ]
            if gather is None:
                if sl.stop > sl.start:
                    v[sl.start] = complex(arr)
            else:
                v[sl] = arr[gather]
        return v * self.scale

    def vector(self, coords):
        coords = np.asarray(coords, dtype=complex) / self.scale
        sectors = {}
        for k in np.nonzero(coords)[0]:
            occ, shape, flats, signs = self._scatter[k]
            if occ not in sectors:
                sectors[occ] = np.zeros(shape, dtype=complex) if shape \
                    else np.zeros((), dtype=complex)
            if flats is None:
                sectors[occ] += coords[k]
            else:
                sectors[occ].reshape(-1)[flats] = signs * coords[k]
        return FockVector(self.grid, self.n_max, sectors)

    def basis_vector(self, k):
        occ, shape, flats, signs = self._scatter[k]
        c = 1.0 / self.scale[k]
        if flats is None:
            arr = np.full((), c, dtype=complex)
        else:
            arr = np.zeros(shape, dtype=complex)
            arr.reshape(-1)[flats] = signs * c
        return FockVector(self.grid, self.n_max, {occ: arr})

    def matrix(self, op):
        """Matrix of a FockVector -> FockVector map in these coordinates."""
        m = np.zeros((self.dim, self.dim), dtype=complex)
        for k in range(self.dim):
            m[:, k] = self.coords(op(self.basis_vector(k)))
        return m

    def identity(self):
        return np.eye(self.dim, dtype=complex)


def _label_images(idx, occ, fermi_flags):
    """Distinct permutation images of a canonical label within its species
    blocks, with fermionic signs."""
    pos = 0
    per_block = []
    for s, n in enumerate(occ):
        block = idx[pos:pos + n]
        pos += n
        images = {}
        for perm in itertools.permutations(range(n)):
            tup = tuple(block[p] for p in perm)
            sgn = _perm_sign(perm) if fermi_flags[s] else 1.0
            images.setdefault(tup, sgn)
        per_block.append(list(images.items()))
    for combo in itertools.product(*per_block):
        image = tuple(i for tup, _s in combo for i in tup)
        sign = 1.0
        for _tup, s in combo:
            sign *= s
        yield image, sign
