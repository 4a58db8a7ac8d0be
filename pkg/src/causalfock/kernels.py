"""Integral kernel operators on the truncated Fock space.

A kernel of orders (l, m) is a complex array over grid^(l+m): the first l
axes are creation slots, the last m annihilation slots, each slot tied to
one species' flattened (spin, point) index.  The associated operator is
the weighted normal-ordered sum

    Xi(kappa) = sum_idx (prod weights) kappa[idx]
                a+_{i_1} .. a+_{i_l} a_{i_{l+1}} .. a_{i_{l+m}},

and is uniquely fixed by the duality pairing

    <<Xi(kappa) Phi, Psi>> = <kappa, eta_{Phi,Psi}>,

where eta is the matrix-element function of the operator string and
<.,.> the weighted bilinear grid pairing.  ``xi_apply`` implements the
closed-form sector action; ``eta_function`` evaluates eta by brute-force
operator insertion, so ``pairing_check`` compares two independent routes.

Combinatorial normalization (fixed by the pairing identity, documented
once here): acting on a sector with per-species occupations n_s after
annihilating m_s slots of species s, each species contributes the factor

    (n_s + m_s)! / n_s!

(the falling-factorial count of ordered annihilations), a sign
(-1)^(m_s(m_s-1)/2) for Fermi species from the reversed application order
of the annihilation string, and the created slots are inserted at the
front of the species block before re-(anti)symmetrization.  Fermionic
cross-species signs follow the grid's global species order.
"""

import itertools
import json
import math

import numpy as np

from .fock import (FockVector, point_annihilate, point_create,
                   fock_inner, symmetrize_sector, _perm_sign)
from .grids import GridError, SpinMomentumGrid

CREATE = "create"
ANNIHILATE = "annihilate"


class SlotError(ValueError):
    pass


class KernelLM:
    """(l, m)-kernel: slot signature plus a complex array over the slots.

    Slots are kept in canonical order: creation slots first, each role
    group sorted by species index (construction reorders the array,
    picking up Fermi signs).  The array is (anti)symmetrized within
    same-species same-role slot groups.
    """

    def __init__(self, grid: SpinMomentumGrid, create_species, annihilate_species,
                 array, symmetrize=True):
        self.grid = grid
        cs = [grid.index(s) for s in create_species]
        as_ = [grid.index(s) for s in annihilate_species]
        arr = np.asarray(array, dtype=complex)
        expected = tuple(grid.species[i].dim for i in cs + as_)
        if arr.shape != expected:
            raise SlotError(f"kernel array shape {arr.shape} does not match "
                            f"slot signature {expected}")
        arr, cs, as_ = self._canonicalize(arr, cs, as_)
        self.create_slots = tuple(cs)
        self.annihilate_slots = tuple(as_)
        if symmetrize:
            arr = self._symmetrize(arr)
        self.array = arr

    @property
    def l(self):
        return len(self.create_slots)

    @property
    def m(self):
        return len(self.annihilate_slots)

    @property
    def signature(self):
        return (self.create_slots, self.annihilate_slots)

    def species_names(self):
        sp = self.grid.species
        return ([sp[i].name for i in self.create_slots],
                [sp[i].name for i in self.annihilate_slots])

    def _canonicalize(self, arr, cs, as_):
        """Stable-sort each role group by species index; Fermi slot swaps
        flip the array sign through axis reordering."""
        order_c = sorted(range(len(cs)), key=lambda i: cs[i])
        order_a = sorted(range(len(as_)), key=lambda i: as_[i])
        perm = order_c + [len(cs) + i for i in order_a]
        if perm != list(range(len(perm))):
            fermi = [self.grid.species[i].is_fermi for i in cs + as_]
            sign = 1.0
            for x in range(len(perm)):
                for y in range(x + 1, len(perm)):
                    if perm[x] > perm[y] and fermi[perm[x]] and fermi[perm[y]]:
                        sign = -sign
            arr = sign * np.transpose(arr, perm)
        return arr, [cs[i] for i in order_c], [as_[i] for i in order_a]

    def _sym_groups(self):
        """Contiguous (axes, fermi) groups of same-species same-role slots."""
        groups = []
        axis = 0
        for role_slots in (self.create_slots, self.annihilate_slots):
            run = []
            prev = None
            for s in role_slots:
                if prev is not None and s != prev:
                    groups.append((run, self.grid.species[prev].is_fermi))
                    run = []
                run.append(axis)
                prev = s
                axis += 1
            if run:
                groups.append((run, self.grid.species[prev].is_fermi))
        return [(g, f) for g, f in groups if len(g) > 1]

    def _symmetrize(self, arr):
        for axes, fermi in self._sym_groups():
            acc = np.zeros_like(arr)
            for perm in itertools.permutations(range(len(axes))):
                sign = _perm_sign(perm) if fermi else 1.0
                axis_map = list(range(arr.ndim))
                for a, b in zip(axes, perm):
                    axis_map[a] = axes[b]
                acc += sign * np.transpose(arr, axis_map)
            arr = acc / math.factorial(len(axes))
        return arr

    def symmetry_defect(self):
        return float(np.max(np.abs(self.array - self._symmetrize(self.array)))) \
            if self.array.size else 0.0

    def scaled(self, c):
        k = KernelLM.__new__(KernelLM)
        k.grid = self.grid
        k.create_slots = self.create_slots
        k.annihilate_slots = self.annihilate_slots
        k.array = c * self.array
        return k

    def to_json(self):
        cnames, anames = self.species_names()
        slots = ([{"species": s, "role": CREATE} for s in cnames]
                 + [{"species": s, "role": ANNIHILATE} for s in anames])
        flat = self.array.reshape(-1)
        return {"l": self.l, "m": self.m, "slots": slots,
                "shape": list(self.array.shape),
                "data": [[float(z.real), float(z.imag)] for z in flat]}

    @classmethod
    def from_json(cls, grid, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        cnames = [s["species"] for s in doc["slots"] if s["role"] == CREATE]
        anames = [s["species"] for s in doc["slots"] if s["role"] == ANNIHILATE]
        data = np.array([complex(re, im) for re, im in doc["data"]])
        return cls(grid, cnames, anames, data.reshape(doc["shape"]))


def scalar_kernel(grid, value):
    """(0,0) kernel: multiplication by a constant."""
    return KernelLM(grid, [], [], np.array(complex(value)))


class OperatorSum:
    """Finite sum of (coefficient, kernel) terms, merged so that no two
    stored terms share an (l, m, slot signature)."""

    def __init__(self, grid, terms=()):
        self.grid = grid
        self.terms = []
        for coeff, kern in terms:
            self._accumulate(coeff, kern)

    def _accumulate(self, coeff, kern):
        if kern.grid != self.grid:
            raise SlotError("kernel grid mismatch in OperatorSum")
        for i, (c0, k0) in enumerate(self.terms):
            if k0.signature == kern.signature:
                merged = k0.scaled(c0)
                merged.array = merged.array + coeff * kern.array
                self.terms[i] = (1.0 + 0j, merged)
                return
        self.terms.append((complex(coeff), kern))

    def __add__(self, other):
        out = OperatorSum(self.grid, list(self.terms))
        for c, k in other.terms:
            out._accumulate(c, k)
        return out

    def __neg__(self):
        return self.scaled(-1.0)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, c):
        return OperatorSum(self.grid, [(c * c0, k) for c0, k in self.terms])

    def prune(self, tol=0.0):
        self.terms = [(c, k) for c, k in self.terms
                      if np.max(np.abs(c * k.array)) > tol or k.array.size == 0]
        return self

    def apply(self, phi, out_cap=None):
        out = None
        for c, k in self.terms:
            piece = c * xi_apply(k, phi, out_cap=out_cap)
            out = piece if out is None else out + piece
        if out is None:
            out = FockVector(phi.grid, phi.n_max, {})
        return out

    def matrix(self, basis, col_cap=None, row_cap=None, chunk=384):
        """Matrix in FockBasis coordinates, built sector-batched; the
        output symmetrizer is folded into the canonical projection.

        col_cap / row_cap restrict to input/output sectors with total
        occupation <= cap; the returned block's columns and rows then
        follow ``basis.sector_labels(cap)`` order.  Composition tests on
        large grids use the rectangular blocks to keep memory flat.
        """
        rcap = basis.n_max if row_cap is None else min(row_cap, basis.n_max)
        rows = basis.sector_labels(row_cap)
        row_pos = np.asarray(rows)
        n_cols = len(basis.sector_labels(col_cap))
        m = np.zeros((len(rows), n_cols), dtype=complex)
        col_at = 0
        for occ, sl in basis.sector_slices.items():
            if sl.stop == sl.start:
                continue
            if col_cap is not None and sum(occ) > col_cap:
                continue
            sector_cols = sl.stop - sl.start
            plans = []
            for c, k in self.terms:
                plan = _sector_plan(k, occ)
                if plan is None or sum(plan[0]) > rcap:
                    continue
                plans.append((c, k, plan))
            if plans:
                for start in range(0, sector_cols, chunk):
                    stop = min(start + chunk, sector_cols)
                    x = basis.sector_batch(occ, start, stop)
                    acc = {}
                    for c, k, plan in plans:
                        res = c * _apply_plan(k, plan, x, batch=True)
                        new_occ = plan[0]
                        if new_occ in acc:
                            acc[new_occ] = acc[new_occ] + res
                        else:
                            acc[new_occ] = res
                    block = basis.project_batch(acc, stop - start)
                    m[:, col_at + start:col_at + stop] = block[row_pos, :]
            col_at += sector_cols
        return m


def _slot_counts(slots, n_species):
    counts = [0] * n_species
    for s in slots:
        counts[s] += 1
    return counts


def _ann_weighted(kernel: KernelLM):
    """Kernel array with the quadrature weights folded onto the
    annihilation axes (cached; creation-axis weights cancel against the
    1/weight of the point-state convention)."""
    cached = getattr(kernel, "_ann_weighted_cache", None)
    if cached is not None:
        return cached
    karr = kernel.array
    for j, slot in enumerate(kernel.annihilate_slots):
        ax = kernel.l + j
        w = kernel.grid.species[slot].flat_weights()
        shape = [1] * karr.ndim
        shape[ax] = len(w)
        karr = karr * w.reshape(shape)
    kernel._ann_weighted_cache = karr
    return karr


def _sector_plan(kernel: KernelLM, occ):
    """Per-(kernel, input-sector) application plan: output occupation,
    combinatorial factor, contraction axes and the interleave permutation
    (cached on the kernel).  None when the sector lacks the slots.

    Factor bookkeeping (see module docstring): grouped-string reorder
    sign, per-species Jordan-Wigner and annihilation-reversal signs, and
    the falling-factorial prefactor (n_s + m_s)!/n_s!.
    """
    cache = getattr(kernel, "_plan_cache", None)
    if cache is None:
        cache = kernel._plan_cache = {}
    if occ in cache:
        return cache[occ]
    grid = kernel.grid
    S = grid.n_species
    lcounts = _slot_counts(kernel.create_slots, S)
    mcounts = _slot_counts(kernel.annihilate_slots, S)
    fermi = [sp.is_fermi for sp in grid.species]
    if any(occ[s] < mcounts[s] for s in range(S)):
        cache[occ] = None
        return None
    new_occ = tuple(occ[s] - mcounts[s] + lcounts[s] for s in range(S))
    factor = 1.0
    for s in range(S):
        for s2 in range(s + 1, S):
            if fermi[s] and fermi[s2] and (mcounts[s] * lcounts[s2]) % 2:
                factor = -factor
    for s in range(S):
        ls, ms = lcounts[s], mcounts[s]
        if ls == 0 and ms == 0:
            continue
        if fermi[s]:
            below = sum(occ[s2] for s2 in range(s) if fermi[s2])
            if ((ls + ms) * below) % 2:
                factor = -factor
            if (ms * (ms - 1) // 2) % 2:
                factor = -factor
        n_rem = occ[s] - ms
        for j in range(ms):
            factor *= (n_rem + ms - j)
    state_axes = []
    offset = 0
    for s in range(S):
        state_axes.extend(range(offset, offset + mcounts[s]))
        offset += occ[s]
    kern_a_axes = list(range(sum(lcounts), sum(lcounts) + sum(mcounts)))
    rem_counts = [occ[s] - mcounts[s] for s in range(S)]
    dest_order = []
    cpos = 0
    rpos = sum(lcounts)
    for s in range(S):
        dest_order.extend(range(cpos, cpos + lcounts[s]))
        cpos += lcounts[s]
        dest_order.extend(range(rpos, rpos + rem_counts[s]))
        rpos += rem_counts[s]
    plan = (new_occ, factor, tuple(kern_a_axes), tuple(state_axes),
            tuple(dest_order))
    cache[occ] = plan
    return plan


def _apply_plan(kernel, plan, arr, batch=False):
    """Contract one sector array (optionally with a trailing batch axis)
    through a sector plan; returns the unsymmetrized raw output."""
    _new_occ, factor, kern_a_axes, state_axes, dest_order = plan
    karr = _ann_weighted(kernel)
    contracted = np.tensordot(karr, arr, axes=(list(kern_a_axes),
                                               list(state_axes)))
    order = list(dest_order)
    if batch:
        order = order + [contracted.ndim - 1]
    if order != list(range(contracted.ndim)):
        contracted = np.transpose(contracted, order)
    return factor * contracted


def xi_apply_raw(kernel: KernelLM, phi: FockVector, track_loss=True,
                 out_cap=None):
    """Unsymmetrized sector contributions of Xi(kernel) applied to phi.

    Returns (sector_arrays, truncation_loss, truncated_writes); the
    arrays still need the graded symmetrizer (xi_apply adds it, the
    matrix builder folds it into a sparse gather instead).  With
    track_loss=False overflow sectors are counted but their norm is not
    evaluated.  out_cap lowers the output truncation below phi.n_max.
    """
    grid = kernel.grid
    if phi.grid != grid:
        raise GridError("kernel and state live on different grids")
    cap = phi.n_max if out_cap is None else min(out_cap, phi.n_max)
    out_sectors = {}
    loss = 0.0
    dropped = 0
    for occ, arr in phi.sectors.items():
        plan = _sector_plan(kernel, occ)
        if plan is None:
            continue
        new_occ = plan[0]
        overflow = sum(new_occ) > cap
        if overflow and not track_loss:
            dropped += 1
            continue
        res = _apply_plan(kernel, plan, arr)
        if overflow:
            # loss gauged on the unsymmetrized contribution (upper bound;
            # the symmetrizer is a projection)
            tmp = FockVector(grid, sum(new_occ), {new_occ: res})
            loss += tmp.norm2()
            dropped += 1
            continue
        if new_occ in out_sectors:
            out_sectors[new_occ] = out_sectors[new_occ] + res
        else:
            out_sectors[new_occ] = res
    return out_sectors, loss, dropped


def xi_apply(kernel: KernelLM, phi: FockVector, out_cap=None) -> FockVector:
    """Closed-form sector action of Xi(kernel) on a truncated state.

    Agrees with the brute-force weighted operator-string sum (the
    defining pairing); see the module docstring for the combinatorial
    factor table.  Sector overflow is truncated and recorded on the
    result.
    """
    raw, loss, dropped = xi_apply_raw(kernel, phi, out_cap=out_cap)
    fermi = [sp.is_fermi for sp in kernel.grid.species]
    out_sectors = {occ: symmetrize_sector(arr, occ, fermi)
                   for occ, arr in raw.items()}
    result = FockVector(phi.grid, phi.n_max, out_sectors)
    result.truncation_loss = loss
    result.truncated_writes = dropped
    return result


def xi_apply_brute(kernel: KernelLM, phi: FockVector) -> FockVector:
    """Reference route: literal weighted sum of point-operator strings.

    Exponentially slower than xi_apply; used as the independent oracle.
    """
    grid = kernel.grid
    sp = grid.species
    cslots, aslots = kernel.create_slots, kernel.annihilate_slots
    dims = [sp[i].dim for i in cslots + aslots]
    out = FockVector(grid, phi.n_max, {})
    wvecs = [sp[i].flat_weights() for i in cslots + aslots]
    for idx in itertools.product(*[range(d) for d in dims]):
        val = kernel.array[idx]
        if val == 0:
            continue
        weight = 1.0
        for w, i in zip(wvecs, idx):
            weight *= w[i]
        state = phi
        # apply the string right to left
        for pos in reversed(range(len(idx))):
            slot = (cslots + aslots)[pos]
            species = sp[slot]
            spin_i, point_i = divmod(idx[pos], species.n_points)
            if pos < len(cslots):
                state = point_create(grid, species.name,
                                     species.spins[spin_i], point_i, state)
            else:
                state = point_annihilate(grid, species.name,
                                         species.spins[spin_i], point_i, state)
        out = out + (val * weight) * state
    return out


def eta_function(phi: FockVector, psi: FockVector, create_species,
                 annihilate_species):
    """eta_{phi,psi} on grid^(l+m): matrix elements of the point-operator
    strings, <<a+_{p_1}..a+_{p_l} a_{q_1}..a_{q_m} phi, psi>>.

    Computed by brute-force operator insertion (independent of xi_apply).
    Truncation loss of the insertions accumulates on the returned report.
    """
    grid = phi.grid
    sp = grid.species
    cslots = [grid.index(s) for s in create_species]
    aslots = [grid.index(s) for s in annihilate_species]
    dims = [sp[i].dim for i in cslots + aslots]
    eta = np.zeros(tuple(dims), dtype=complex)
    loss = 0.0
    for idx in itertools.product(*[range(d) for d in dims]):
        state = phi
        for pos in reversed(range(len(idx))):
            slot = (cslots + aslots)[pos]
            species = sp[slot]
            spin_i, point_i = divmod(idx[pos], species.n_points)
            if pos < len(cslots):
                state = point_create(grid, species.name,
                                     species.spins[spin_i], point_i, state)
                loss += state.truncation_loss
            else:
                state = point_annihilate(grid, species.name,
                                         species.spins[spin_i], point_i, state)
        eta[idx] = fock_inner(state, psi)
    return eta, loss


def grid_pairing(kernel: KernelLM, eta):
    """<kappa, eta>: weighted bilinear pairing over grid^(l+m)."""
    arr = kernel.array
    grid = kernel.grid
    slots = kernel.create_slots + kernel.annihilate_slots
    for ax, slot in enumerate(slots):
        w = grid.species[slot].flat_weights()
        shape = [1] * arr.ndim
        shape[ax] = len(w)
        arr = arr * w.reshape(shape)
    return complex(np.sum(arr * eta))


def pairing_check(kernel: KernelLM, phi: FockVector, psi: FockVector):
    """Both sides of the defining duality identity, computed independently.

    Returns (lhs, rhs) with lhs = <<Xi(kappa) phi, psi>> via the closed
    form and rhs = <kappa, eta_{phi,psi}> via brute-force insertion.
    """
    cnames, anames = kernel.species_names()
    lhs = fock_inner(xi_apply(kernel, phi), psi)
    eta, _ = eta_function(phi, psi, cnames, anames)
    rhs = grid_pairing(kernel, eta)
    return lhs, rhs


def contract(kern_left: KernelLM, kern_right: KernelLM, pairs):
    """Weighted k-fold contraction kern_left (x)_k kern_right.

    ``pairs`` is a sequence of (left_slot_index, right_slot_index) into
    the kernels' canonical slot lists (creation slots first).  Each pair
    must join an annihilation slot of one kernel to a creation slot of
    the other, same species.  Returns the contracted KernelLM,
    (anti)symmetrized; the fermionic scheme sign is NOT included here
    (it belongs to the ContractionScheme).
    """
    grid = kern_left.grid
    if kern_right.grid != grid:
        raise SlotError("kernels live on different grids")
    lslots = list(kern_left.create_slots) + list(kern_left.annihilate_slots)
    rslots = list(kern_right.create_slots) + list(kern_right.annihilate_slots)
    lroles = [CREATE] * kern_left.l + [ANNIHILATE] * kern_left.m
    rroles = [CREATE] * kern_right.l + [ANNIHILATE] * kern_right.m
    used_l, used_r = set(), set()
    for il, ir in pairs:
        if il in used_l or ir in used_r:
            raise SlotError("contraction pairs must be disjoint")
        used_l.add(il)
        used_r.add(ir)
        if lslots[il] != rslots[ir]:
            raise SlotError("contracted slots must share a species")
        if {lroles[il], rroles[ir]} != {CREATE, ANNIHILATE}:
            raise SlotError("a contraction joins one annihilation slot to "
                            "one creation slot")
    la = kern_left.array
    ra = kern_right.array
    # weights on the left contracted axes (one weight per contracted pair)
    for il, _ in pairs:
        w = grid.species[lslots[il]].flat_weights()
        shape = [1] * la.ndim
        shape[il] = len(w)
        la = la * w.reshape(shape)
    axes_l = [il for il, _ in pairs]
    axes_r = [ir for _, ir in pairs]
    arr = np.tensordot(la, ra, axes=(axes_l, axes_r)) if pairs else \
        np.tensordot(la, ra, axes=0)
    keep_l = [i for i in range(len(lslots)) if i not in used_l]
    keep_r = [i for i in range(len(rslots)) if i not in used_r]
    # tensordot output axes: kept-left order then kept-right order
    out_species = []
    out_roles = []
    for i in keep_l:
        out_species.append(lslots[i])
        out_roles.append(lroles[i])
    for i in keep_r:
        out_species.append(rslots[i])
        out_roles.append(rroles[i])
    # gather into (creations..., annihilations...) keeping relative order;
    # count Fermi inversions of the gather permutation
    order = [i for i, r in enumerate(out_roles) if r == CREATE] + \
            [i for i, r in enumerate(out_roles) if r == ANNIHILATE]
    if order != list(range(len(order))):
        fermi = [grid.species[s].is_fermi for s in out_species]
        sign = 1.0
        for x in range(len(order)):
            for y in range(x + 1, len(order)):
                if order[x] > order[y] and fermi[order[x]] and fermi[order[y]]:
                    sign = -sign
        arr = sign * np.transpose(arr, order)
    cnames = [grid.species[out_species[i]].name for i in order
              if out_roles[i] == CREATE]
    anames = [grid.species[out_species[i]].name for i in order
              if out_roles[i] == ANNIHILATE]
    return KernelLM(grid, cnames, anames, arr)
