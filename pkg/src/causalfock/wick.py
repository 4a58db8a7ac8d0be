"""Normal-ordering combinatorics: Wick monomials, contraction schemes with
fermionic signs, and the decomposition of operator products into normal-
ordered kernel sums.

Monomial DSL
------------
A Wick monomial is written ``:factor factor ...:(label)``, optionally
preceded by ``name =``.  Factors:

  ``phi``        scalar field (species "phi" unless remapped),
  ``A[mu]``      e.m. potential with Lorentz index ``mu``,
  ``psi``        Dirac field,
  ``psi#``       Dirac-conjugate field,
  ``gamma[mu]``  gamma-matrix vertex insertion between the neighbouring
                 spinor factors (not a field),

and repeated index labels are summed (``:psi# gamma[nu] psi A[nu]:``).
A numeric index (``gamma[0]``) is fixed instead of summed.  All factors
share the monomial's space-time label; tensor products of monomials with
independent labels are formed at the operator level.

The global fermionic order is (species order in the grid, slot label,
role); swapping two fermionic factors inside a monomial negates every
kernel.
"""

import itertools
import re

import numpy as np

from . import fields
from .kernels import CREATE, ANNIHILATE, KernelLM, OperatorSum, contract
from .grids import DISPERSION_EPS, SpinMomentumGrid

DEFAULT_SPECIES_MAP = {"phi": "phi", "A": "em", "psi": "dirac",
                       "psi#": "dirac"}
FIELD_KINDS = {"phi": fields.KIND_SCALAR, "A": fields.KIND_VECTOR,
               "psi": fields.KIND_DIRAC, "psi#": fields.KIND_DIRAC_CONJ}


class WickError(ValueError):
    pass


class RegularizationError(RuntimeError):
    """Raised when a class-A composition is attempted without the
    epsilon regularization of its massless slots."""


class WickMonomial:
    """Ordered factor list with a component-contraction vertex tensor.

    factors: list of (field_symbol, species_name); vertex: complex array
    with one axis per factor's component space (scalars contribute a
    length-1 axis).  label: the shared space-time slot label.
    """

    def __init__(self, factors, vertex, label="x"):
        self.factors = list(factors)
        self.vertex = np.asarray(vertex, dtype=complex)
        self.label = label
        if self.vertex.ndim != len(self.factors):
            raise WickError("vertex rank must equal the factor count")

    def fermi_parity(self, grid):
        count = sum(1 for _, sp in self.factors if grid[sp].is_fermi)
        return count % 2

    def swap_factors(self, i, j):
        """Exchange two factors (vertex axes move along)."""
        factors = list(self.factors)
        factors[i], factors[j] = factors[j], factors[i]
        axes = list(range(self.vertex.ndim))
        axes[i], axes[j] = axes[j], axes[i]
        return WickMonomial(factors, np.transpose(self.vertex, axes),
                            self.label)

    def __repr__(self):
        names = " ".join(sym for sym, _ in self.factors)
        return f"WickMonomial(:{names}:({self.label}))"


def parse_monomial(text, species_map=None, label=None):
    """Parse the DSL into a WickMonomial (see module docstring)."""
    species_map = dict(DEFAULT_SPECIES_MAP, **(species_map or {}))
    text = text.strip()
    m = re.match(r"^(?:[A-Za-z_]\w*\s*(?:\(\s*\w+\s*\))?\s*=\s*)?"
                 r":\s*(?P<body>[^:]*)\s*:\s*(?:\(\s*(?P<label>\w+)\s*\))?$",
                 text)
    if not m:
        raise WickError(f"cannot parse monomial {text!r}")
    body = m.group("body").strip()
    label = label or m.group("label") or "x"
    tokens = re.findall(r"(psi#|psi|phi|A|gamma)(?:\[(\w+)\])?", body)
    if not tokens or "".join(t[0] + (f"[{t[1]}]" if t[1] else "")
                             for t in tokens).replace(" ", "") \
            != body.replace(" ", ""):
        raise WickError(f"cannot parse monomial body {body!r}")

    entries = []          # (symbol, index_label or None); gammas inline
    for sym, idx in tokens:
        if sym in ("phi",) and idx:
            raise WickError("scalar factors carry no index")
        if sym in ("A", "gamma") and not idx:
            raise WickError(f"{sym} requires an index label")
        entries.append((sym, idx or None))

    factors = []          # field factors only
    ops = []              # per factor: dict describing component coupling
    gammas_pending = []
    for sym, idx in entries:
        if sym == "gamma":
            gammas_pending.append(idx)
            continue
        if sym in ("psi", "psi#"):
            if idx is not None:
                # fixed-component spinor, stands outside any gamma chain
                if gammas_pending:
                    raise WickError("gamma insertions require an unindexed "
                                    "spinor chain")
                if not idx.isdigit():
                    raise WickError("spinor component indices must be "
                                    "numeric")
                factors.append((sym, species_map[sym]))
                ops.append({"kind": "spinor_fixed", "index": int(idx)})
            else:
                factors.append((sym, species_map[sym]))
                ops.append({"kind": "spinor",
                            "gammas_before": list(gammas_pending)})
                gammas_pending = []
        elif sym == "A":
            factors.append((sym, species_map[sym]))
            ops.append({"kind": "vector", "index": idx})
        else:
            factors.append((sym, species_map[sym]))
            ops.append({"kind": "scalar"})
    if gammas_pending:
        raise WickError("trailing gamma insertion with no spinor to its right")

    # assemble the vertex tensor: start from identity couplings and contract
    # summed index labels
    # spinor chain: consecutive psi# .. psi pairs sandwich their gammas
    dims = []
    for (sym, _name) in factors:
        dims.append(fields.N_COMPONENTS[FIELD_KINDS[sym]])
    # build as einsum over per-factor open axes
    # represent vertex entries via dense iteration (desk-scale dims <= 4)
    vertex = np.zeros(dims, dtype=complex) if dims else np.array(1.0 + 0j)

    # summed index labels: iterate over their values, accumulating weights
    free_labels = sorted({idx for (sym, idx) in entries
                          if idx and not idx.isdigit()})

    spinor_positions = [i for i, op in enumerate(ops)
                        if op["kind"] == "spinor"]
    # pair psi# with the following psi (chain order)
    chains = []
    open_conj = None
    for i in spinor_positions:
        if factors[i][0] == "psi#":
            if open_conj is not None:
                raise WickError("two conjugate spinors without a psi between")
            open_conj = i
        else:
            if open_conj is None:
                raise WickError("psi without a preceding psi#")
            chains.append((open_conj, i))
            open_conj = None
    if open_conj is not None:
        raise WickError("unmatched psi#")

    def gamma_product(labels, assignment):
        mat = np.eye(4, dtype=complex)
        for lab in labels:
            mu = int(lab) if lab.isdigit() else assignment[lab]
            mat = mat @ fields.GAMMA[mu]
        return mat

    for assignment_vals in itertools.product(range(4), repeat=len(free_labels)):
        assignment = dict(zip(free_labels, assignment_vals))
        chain_mats = {}
        for (i_conj, i_psi) in chains:
            labels = ops[i_psi]["gammas_before"]
            chain_mats[(i_conj, i_psi)] = gamma_product(labels, assignment)
        for idx_tuple in itertools.product(*[range(d) for d in dims]):
            w = 1.0 + 0j
            for fi, op in enumerate(ops):
                if op["kind"] == "vector":
                    lab = op["index"]
                    mu = int(lab) if lab.isdigit() else assignment[lab]
                    if idx_tuple[fi] != mu:
                        w = 0.0
                        break
                elif op["kind"] == "spinor_fixed":
                    if idx_tuple[fi] != op["index"]:
                        w = 0.0
                        break
            if w == 0.0:
                continue
            for (i_conj, i_psi), mat in chain_mats.items():
                w *= mat[idx_tuple[i_conj], idx_tuple[i_psi]]
            if w != 0.0:
                vertex[idx_tuple] += w
    if not dims:
        vertex = np.array(1.0 + 0j)
    return WickMonomial(factors, vertex, label)


# ---------------------------------------------------------------------------
# kernel assembly


def monomial_kernels(monomial: WickMonomial, grid: SpinMomentumGrid,
                     tests) -> OperatorSum:
    """Kernels of a Wick product, evaluated at per-label test functions.

    ``tests`` maps slot labels to TestFunctionSpec (a single spec is
    shorthand for {label: spec}).  Factors sharing a label couple through
    one Fourier factor at their signed momentum sum (pointwise product);
    distinct labels factorize (tensor product).
    """
    if not isinstance(tests, dict):
        tests = {monomial.label: tests}
    n = len(monomial.factors)
    labels = [monomial.label] * n if isinstance(monomial.label, str) \
        else list(monomial.label)
    for lab in labels:
        if lab not in tests:
            raise WickError(f"no test function supplied for label {lab!r}")
    species = [grid[name] for _sym, name in monomial.factors]
    kinds = [FIELD_KINDS[sym] for sym, _name in monomial.factors]
    fermi = [sp.is_fermi for sp in species]
    momenta = [fields.flat_four_momenta(sp) for sp in species]

    terms = []
    for parts in itertools.product((CREATE, ANNIHILATE), repeat=n):
        coeffs = [fields.field_coefficients(species[i], kinds[i], parts[i])
                  for i in range(n)]
        if any(np.all(c == 0) for c in coeffs):
            continue
        # normal-ordering sign: annihilation parts standing left of
        # creation parts transpose past them; fermi pairs count
        sign = 1.0
        for i in range(n):
            for j in range(i + 1, n):
                if (parts[i] == ANNIHILATE and parts[j] == CREATE
                        and fermi[i] and fermi[j]):
                    sign = -sign
        # kernel over slots in factor order
        subs_in = []
        operands = [monomial.vertex]
        comp_letters = [chr(ord('a') + i) for i in range(n)]
        slot_letters = [chr(ord('A') + i) for i in range(n)]
        subs_in.append("".join(comp_letters))
        for i in range(n):
            operands.append(coeffs[i])
            subs_in.append(comp_letters[i] + slot_letters[i])
        expr = ",".join(subs_in) + "->" + "".join(slot_letters)
        karr = np.einsum(expr, *operands)
        # Fourier factor per label group at the signed momentum sum
        # (+ for creation, - for annihilation)
        phase = np.ones(karr.shape, dtype=complex)
        for lab in sorted(set(labels)):
            members = [i for i in range(n) if labels[i] == lab]
            psum = np.zeros(tuple(karr.shape[i] if i in members else 1
                                  for i in range(n)) + (4,))
            for i in members:
                sgn = 1.0 if parts[i] == CREATE else -1.0
                shape = [1] * n + [4]
                shape[i] = karr.shape[i]
                psum = psum + sgn * momenta[i].reshape(shape)
            phase = phase * tests[lab].fourier(psum)
        karr = sign * karr * phase
        cnames = [species[i].name for i in range(n) if parts[i] == CREATE]
        anames = [species[i].name for i in range(n) if parts[i] == ANNIHILATE]

        order = [i for i in range(n) if parts[i] == CREATE] + \
                [i for i in range(n) if parts[i] == ANNIHILATE]
        karr = np.transpose(karr, order) if order != list(range(n)) else karr
        terms.append((1.0 + 0j, KernelLM(grid, cnames, anames, karr)))
    return OperatorSum(grid, terms)


def pointwise_wick_kernels(monomial, grid, test) -> OperatorSum:
    """Kernels of the Wick pointwise product at a single test function."""
    if isinstance(monomial, str):
        monomial = parse_monomial(monomial)
    return monomial_kernels(monomial, grid, {monomial.label: test})


def classify_operator_class(grid, factor_species):
    """'B' iff every factor species is massive (maps test states to test
    states); 'A' otherwise."""
    for name in factor_species:
        if grid[name].mass == 0:
            return "A"
    return "B"


# ---------------------------------------------------------------------------
# contraction schemes


class ContractionScheme:
    """k disjoint role-opposed same-species slot pairings with the
    fermionic transposition sign.

    ``pairs`` index the canonical slot lists of the two sides; direction
    'lr' pairs annihilation slots of the left factor with creation slots
    of the right (the orientation realized by operator composition),
    'rl' the reverse.
    """

    def __init__(self, pairs, sign, direction="lr"):
        self.pairs = tuple(sorted(pairs))
        self.sign = sign
        self.direction = direction

    @property
    def k(self):
        return len(self.pairs)

    def __repr__(self):
        return f"ContractionScheme(k={self.k}, sign={self.sign:+.0f}, " \
               f"{self.direction}, pairs={list(self.pairs)})"

    def __eq__(self, other):
        return (self.pairs, self.direction) == (other.pairs, other.direction)

    def __hash__(self):
        return hash((self.pairs, self.direction))


def _scheme_sign(left_slots, right_slots, pairs):
    """Fermionic sign from bringing each contracted pair adjacent.

    Slots are (species_index, role, fermi) in composition order: the full
    string is left slots then right slots.  Standard removal algorithm:
    contract pairs one by one, counting live fermionic slots strictly
    between the endpoints.  The sign of normal-ordering the surviving
    slots is NOT included here: ``contract`` picks it up when gathering
    the remaining axes into canonical creation-first order.
    """
    slots = list(left_slots) + list(right_slots)
    offset = len(left_slots)
    alive = [True] * len(slots)
    sign = 1.0
    for il, ir in pairs:
        a, b = il, offset + ir
        lo, hi = (a, b) if a < b else (b, a)
        if slots[a][2] and slots[b][2]:
            crossings = sum(1 for t in range(lo + 1, hi)
                            if alive[t] and slots[t][2])
            if crossings % 2:
                sign = -sign
        alive[a] = alive[b] = False
    return sign


def _slot_list(grid, kernel: KernelLM):
    out = []
    for s in kernel.create_slots:
        out.append((s, CREATE, grid.species[s].is_fermi))
    for s in kernel.annihilate_slots:
        out.append((s, ANNIHILATE, grid.species[s].is_fermi))
    return out


def _kernel_schemes(grid, kern_left, kern_right):
    """All 'lr' schemes between two kernels: partial injective matchings of
    left annihilation slots onto right creation slots, species-matched."""
    left = _slot_list(grid, kern_left)
    right = _slot_list(grid, kern_right)
    l_ann = [i for i, s in enumerate(left) if s[1] == ANNIHILATE]
    r_cre = [j for j, s in enumerate(right) if s[1] == CREATE]
    schemes = []
    kmax = min(len(l_ann), len(r_cre))
    for k in range(kmax + 1):
        for asub in itertools.combinations(l_ann, k):
            for csub in itertools.permutations(r_cre, k):
                if any(left[a][0] != right[c][0]
                       for a, c in zip(asub, csub)):
                    continue
                pairs = tuple(zip(asub, csub))
                schemes.append(ContractionScheme(
                    pairs, _scheme_sign(left, right, pairs), "lr"))
    return schemes


def monomial_slots(grid, monomial: WickMonomial):
    """Monomial-level slot list: each field factor contributes one creation
    and one annihilation slot (label, factor order)."""
    out = []
    for role in (CREATE, ANNIHILATE):
        for _sym, name in monomial.factors:
            si = grid.index(name)
            out.append((si, role, grid.species[si].is_fermi))
    return out


def enumerate_contractions(grid, mon_left: WickMonomial,
                           mon_right: WickMonomial):
    """Complete duplicate-free scheme enumeration between two monomials,
    both orientations (a of one side against a+ of the other)."""
    left = monomial_slots(grid, mon_left)
    right = monomial_slots(grid, mon_right)
    schemes = []
    for direction in ("lr", "rl"):
        if direction == "lr":
            a_side, c_side = left, right
        else:
            a_side, c_side = right, left
        a_idx = [i for i, s in enumerate(a_side) if s[1] == ANNIHILATE]
        c_idx = [j for j, s in enumerate(c_side) if s[1] == CREATE]
        kmax = min(len(a_idx), len(c_idx))
        for k in range(kmax + 1):
            if k == 0:
                if direction == "lr":
                    schemes.append(ContractionScheme((), 1.0, "lr"))
                continue
            for asub in itertools.combinations(a_idx, k):
                for csub in itertools.permutations(c_idx, k):
                    if any(a_side[a][0] != c_side[c][0]
                           for a, c in zip(asub, csub)):
                        continue
                    pairs = tuple(zip(asub, csub))
                    if direction == "lr":
                        sign = _scheme_sign(left, right, pairs)
                    else:
                        sign = _scheme_sign(right, left, pairs)
                    schemes.append(ContractionScheme(pairs, sign, direction))
    return schemes


def _check_regularized(opsum: OperatorSum, eps):
    grid = opsum.grid
    seen = set()
    for _c, k in opsum.terms:
        seen.update(k.create_slots)
        seen.update(k.annihilate_slots)
    for si in seen:
        sp = grid.species[si]
        if sp.mass == 0:
            if sp.dispersion != DISPERSION_EPS:
                raise RegularizationError(
                    f"massless species {sp.name!r} enters a composition "
                    "without epsilon regularization; rebuild the grid with "
                    "the eps dispersion rule")
            if abs(sp.epsilon - eps) > 1e-12:
                raise RegularizationError(
                    f"species {sp.name!r} is regularized with eps="
                    f"{sp.epsilon}, composition requested eps={eps}")


def wick_decompose_product(op_left: OperatorSum, op_right: OperatorSum,
                           eps) -> OperatorSum:
    """Normal-ordered kernel sum of the operator composition.

    Sums sign * contract(kappa', kappa'', scheme) over all kernel pairs
    and 'lr' schemes; equals the matrix composition Xi'(phi) o Xi''(psi)
    on the truncated space (given headroom above the compared sectors).
    Requires eps > 0 and eps-regularized grids for every massless slot.
    """
    if eps <= 0:
        raise RegularizationError("wick_decompose_product requires eps > 0")
    grid = op_left.grid
    _check_regularized(op_left, eps)
    _check_regularized(op_right, eps)
    terms = []
    for cl, kl in op_left.terms:
        for cr, kr in op_right.terms:
            for scheme in _kernel_schemes(grid, kl, kr):
                kc = contract(kl, kr, scheme.pairs)
                terms.append((cl * cr * scheme.sign, kc))
    return OperatorSum(grid, terms).prune(0.0)
