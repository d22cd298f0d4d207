"""Exact integer linear algebra and finitely generated abelian groups.

Everything in this module is exact: matrices carry Python ints (arbitrary
precision is mandatory, since Smith normal form intermediates can exceed
machine words even for small inputs), Smith normal forms come with their
unimodular transforms, and groups are kept in invariant-factor form so that
isomorphism questions reduce to tuple comparison.

The pieces fit together as follows.  ``smith_normal_form`` diagonalizes an
integer matrix M as ``U @ M @ V == D`` with U, V unimodular and the diagonal
in divisibility order.  ``cokernel`` presents Z^n modulo the row lattice of a
relation matrix and remembers enough of the transform to convert ambient
integer vectors into canonical coordinates (``Presentation.class_of``).
``kernel_basis`` returns a saturated basis of the integer kernel lattice.
``GroupHom`` is a homomorphism between presented groups, checked for
well-definedness at construction.  ``colimit_chain`` computes the direct
limit of a finite prefix of a chain of groups along homomorphisms, with an
explicit, honestly-flagged stabilization heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


class IntMatrix:
    """Immutable dense integer matrix, row-major, arbitrary precision."""

    __slots__ = ("rows", "cols", "entries", "_hash")

    def __init__(self, rows: int, cols: int, entries: Sequence[int]):
        if rows < 0 or cols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        entries = tuple(int(x) for x in entries)
        if len(entries) != rows * cols:
            raise ValueError(
                f"expected {rows * cols} entries for a {rows}x{cols} matrix, got {len(entries)}"
            )
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("IntMatrix is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], cols: int | None = None) -> "IntMatrix":
        rows = [list(r) for r in rows]
        if rows:
            ncols = len(rows[0])
            if any(len(r) != ncols for r in rows):
                raise ValueError("ragged rows")
        else:
            ncols = 0 if cols is None else cols
        return cls(len(rows), ncols, [x for r in rows for x in r])

    @classmethod
    def identity(cls, n: int) -> "IntMatrix":
        return cls(n, n, [1 if i == j else 0 for i in range(n) for j in range(n)])

    @classmethod
    def zero(cls, rows: int, cols: int) -> "IntMatrix":
        return cls(rows, cols, [0] * (rows * cols))

    @classmethod
    def diagonal(cls, diag: Sequence[int]) -> "IntMatrix":
        n = len(diag)
        return cls(n, n, [diag[i] if i == j else 0 for i in range(n) for j in range(n)])

    @classmethod
    def column(cls, vec: Sequence[int]) -> "IntMatrix":
        return cls(len(vec), 1, list(vec))

    # -- access ------------------------------------------------------------

    def entry(self, i: int, j: int) -> int:
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> tuple[int, ...]:
        return self.entries[i * self.cols : (i + 1) * self.cols]

    def col(self, j: int) -> tuple[int, ...]:
        return self.entries[j :: self.cols] if self.cols else ()

    def iter_rows(self):
        for i in range(self.rows):
            yield self.row(i)

    def to_lists(self) -> list[list[int]]:
        return [list(self.row(i)) for i in range(self.rows)]

    # -- algebra -----------------------------------------------------------

    def transpose(self) -> "IntMatrix":
        return IntMatrix(
            self.cols, self.rows, [self.entry(i, j) for j in range(self.cols) for i in range(self.rows)]
        )

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.rows}x{self.cols} @ {other.rows}x{other.cols}")
        out = []
        orows = other.to_lists()
        for i in range(self.rows):
            r = self.row(i)
            acc = [0] * other.cols
            for k, x in enumerate(r):
                if x:
                    ork = orows[k]
                    for j in range(other.cols):
                        y = ork[j]
                        if y:
                            acc[j] += x * y
            out.extend(acc)
        return IntMatrix(self.rows, other.cols, out)

    def __neg__(self) -> "IntMatrix":
        return IntMatrix(self.rows, self.cols, [-x for x in self.entries])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, IntMatrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and self.entries == other.entries
        )

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.rows, self.cols, self.entries))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self):
        return f"IntMatrix({self.rows}x{self.cols}, {self.to_lists()})"

    def mat_vec(self, vec: Sequence[int]) -> tuple[int, ...]:
        """self @ vec with vec a column vector."""
        if len(vec) != self.cols:
            raise ValueError("vector length mismatch")
        out = []
        for i in range(self.rows):
            r = self.row(i)
            out.append(sum(x * v for x, v in zip(r, vec) if x and v))
        return tuple(out)

    def vec_mat(self, vec: Sequence[int]) -> tuple[int, ...]:
        """vec @ self with vec a row vector."""
        if len(vec) != self.rows:
            raise ValueError("vector length mismatch")
        acc = [0] * self.cols
        for i, v in enumerate(vec):
            if v:
                r = self.row(i)
                for j, x in enumerate(r):
                    if x:
                        acc[j] += v * x
        return tuple(acc)

    def vstack(self, other: "IntMatrix") -> "IntMatrix":
        if self.cols != other.cols:
            raise ValueError("column count mismatch in vstack")
        return IntMatrix(self.rows + other.rows, self.cols, self.entries + other.entries)

    def hstack(self, other: "IntMatrix") -> "IntMatrix":
        if self.rows != other.rows:
            raise ValueError("row count mismatch in hstack")
        ents = []
        for i in range(self.rows):
            ents.extend(self.row(i))
            ents.extend(other.row(i))
        return IntMatrix(self.rows, self.cols + other.cols, ents)

    def determinant(self) -> int:
        """Exact determinant by fraction-free (Bareiss) elimination."""
        if self.rows != self.cols:
            raise ValueError("determinant of non-square matrix")
        n = self.rows
        if n == 0:
            return 1
        a = self.to_lists()
        sign = 1
        prev = 1
        for k in range(n - 1):
            if a[k][k] == 0:
                for i in range(k + 1, n):
                    if a[i][k]:
                        a[k], a[i] = a[i], a[k]
                        sign = -sign
                        break
                else:
                    return 0
            for i in range(k + 1, n):
                for j in range(k + 1, n):
                    a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
                a[i][k] = 0
            prev = a[k][k]
        return sign * a[n - 1][n - 1]


# ---------------------------------------------------------------------------
# Smith normal form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmithDecomposition:
    """U @ M @ V == D with U, V unimodular, D diagonal in divisibility order.

    ``v_inv`` is the exact inverse of V, maintained during the reduction; it
    gives sections of the quotient map for free (see ``Presentation``).
    """

    u: IntMatrix
    d: IntMatrix
    v: IntMatrix
    v_inv: IntMatrix

    @property
    def diagonal(self) -> tuple[int, ...]:
        d = self.d
        return tuple(d.entry(i, i) for i in range(min(d.rows, d.cols)))

    @property
    def rank(self) -> int:
        return sum(1 for x in self.diagonal if x != 0)

    def verify(self, m: IntMatrix) -> None:
        """Assert the defining invariants exactly (used by tests)."""
        if (self.u @ m) @ self.v != self.d:
            raise AssertionError("U @ M @ V != D")
        if abs(self.u.determinant()) != 1 or abs(self.v.determinant()) != 1:
            raise AssertionError("transforms are not unimodular")
        if self.v @ self.v_inv != IntMatrix.identity(self.v.rows):
            raise AssertionError("v_inv is not the inverse of V")
        diag = self.diagonal
        for i in range(self.d.rows):
            for j in range(self.d.cols):
                if i != j and self.d.entry(i, j) != 0:
                    raise AssertionError("D is not diagonal")
        for x in diag:
            if x < 0:
                raise AssertionError("negative diagonal entry")
        for a, b in zip(diag, diag[1:]):
            if a == 0 and b != 0:
                raise AssertionError("zero before nonzero on diagonal")
            if a != 0 and b % a != 0:
                raise AssertionError("divisibility chain broken")


def _nearest_quotient(x: int, d: int) -> int:
    q = x // d
    r = x - q * d
    if 2 * abs(r) > abs(d):
        q += 1
    return q


def smith_normal_form(m: IntMatrix) -> SmithDecomposition:
    """Diagonalize ``m`` over Z: returns U, D, V with U @ m @ V == D.

    Pivoting picks the smallest nonzero absolute value in the remaining
    submatrix (with early exit on +/-1), reduces its row and column by
    nearest-integer division, and restarts whenever a smaller remainder
    appears.  Divisibility of later diagonal entries by earlier ones is
    enforced by folding any offending entry into the pivot row.
    """
    nrows, ncols = m.rows, m.cols
    a = m.to_lists()
    u = [[1 if i == j else 0 for j in range(nrows)] for i in range(nrows)]
    v = [[1 if i == j else 0 for j in range(ncols)] for i in range(ncols)]
    vinv = [[1 if i == j else 0 for j in range(ncols)] for i in range(ncols)]

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for row in a:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]
        vinv[i], vinv[j] = vinv[j], vinv[i]

    def row_axpy(i, j, q):
        # row i -= q * row j
        ai, aj = a[i], a[j]
        for k in range(ncols):
            x = aj[k]
            if x:
                ai[k] -= q * x
        ui, uj = u[i], u[j]
        for k in range(nrows):
            x = uj[k]
            if x:
                ui[k] -= q * x

    def col_axpy(i, j, q):
        # col i -= q * col j  (on a and v); inverse row op on vinv
        for row in a:
            x = row[j]
            if x:
                row[i] -= q * x
        for row in v:
            x = row[j]
            if x:
                row[i] -= q * x
        vi, vj = vinv[i], vinv[j]
        for k in range(ncols):
            x = vi[k]
            if x:
                vj[k] += q * x

    def find_pivot(t):
        best = None
        best_val = 0
        for i in range(t, nrows):
            ai = a[i]
            for j in range(t, ncols):
                x = ai[j]
                if x:
                    ax = -x if x < 0 else x
                    if best is None or ax < best_val:
                        best = (i, j)
                        best_val = ax
                        if ax == 1:
                            return best
        return best

    t = 0
    bound = min(nrows, ncols)
    while t < bound:
        piv = find_pivot(t)
        if piv is None:
            break
        while True:
            # always clear against the globally smallest entry: remainders at
            # most half the pivot keep the intermediate growth polynomial
            if piv[0] != t:
                swap_rows(piv[0], t)
            if piv[1] != t:
                swap_cols(piv[1], t)
            d = a[t][t]
            dirty = False
            for i in range(t + 1, nrows):
                x = a[i][t]
                if x:
                    q = _nearest_quotient(x, d)
                    if q:
                        row_axpy(i, t, q)
                    if a[i][t]:
                        dirty = True
            for j in range(t + 1, ncols):
                x = a[t][j]
                if x:
                    q = _nearest_quotient(x, d)
                    if q:
                        col_axpy(j, t, q)
                    if a[t][j]:
                        dirty = True
            if dirty:
                piv = find_pivot(t)
                continue
            if d in (1, -1):
                break
            # force divisibility: pull a non-multiple into the pivot row
            culprit = None
            for i in range(t + 1, nrows):
                ai = a[i]
                for j in range(t + 1, ncols):
                    if ai[j] % d:
                        culprit = i
                        break
                if culprit is not None:
                    break
            if culprit is None:
                break
            ri, rt = a[culprit], a[t]
            for k in range(ncols):
                rt[k] += ri[k]
            ui, ut = u[culprit], u[t]
            for k in range(nrows):
                ut[k] += ui[k]
            piv = (t, t)
        if a[t][t] < 0:
            for k in range(ncols):
                a[t][k] = -a[t][k]
            for k in range(nrows):
                u[t][k] = -u[t][k]
        t += 1

    flat_a = [x for row in a for x in row]
    flat_u = [x for row in u for x in row]
    flat_v = [x for row in v for x in row]
    flat_vinv = [x for row in vinv for x in row]
    return SmithDecomposition(
        u=IntMatrix(nrows, nrows, flat_u),
        d=IntMatrix(nrows, ncols, flat_a),
        v=IntMatrix(ncols, ncols, flat_v),
        v_inv=IntMatrix(ncols, ncols, flat_vinv),
    )


def kernel_basis(m: IntMatrix) -> IntMatrix:
    """Basis of the lattice {x : m @ x == 0}, one basis vector per column.

    The kernel of an integer matrix is saturated (a direct summand), and the
    columns of V at zero diagonal positions form a basis of it.
    """
    snf = smith_normal_form(m)
    diag = snf.diagonal
    free_cols = [j for j in range(m.cols) if j >= len(diag) or diag[j] == 0]
    ents = []
    for i in range(m.cols):
        vrow = snf.v.row(i)
        ents.extend(vrow[j] for j in free_cols)
    return IntMatrix(m.cols, len(free_cols), ents)


# ---------------------------------------------------------------------------
# Finitely generated abelian groups
# ---------------------------------------------------------------------------


def _canonical_from_diagonal(diag: Iterable[int], ambient: int) -> tuple[int, tuple[int, ...]]:
    diag = list(diag)
    factors = tuple(x for x in diag if x >= 2)
    free = ambient - sum(1 for x in diag if x != 0)
    return free, factors


class Presentation:
    """Generators and relations, canonicalized once by Smith normal form.

    ``relations`` rows are integer relations on the generators; the quotient
    group Z^n / rowspace(relations) is put in canonical form and ambient
    vectors can be converted to canonical coordinates and back.
    """

    __slots__ = (
        "generators",
        "relations",
        "snf",
        "free_rank",
        "invariant_factors",
        "_torsion_pos",
        "_free_pos",
    )

    def __init__(self, generators: Sequence[str], relations: IntMatrix):
        self.generators = tuple(generators)
        if relations.cols != len(self.generators):
            raise ValueError("relation matrix width must match generator count")
        self.relations = relations
        self.snf = smith_normal_form(relations)
        diag = self.snf.diagonal
        self.free_rank, self.invariant_factors = _canonical_from_diagonal(diag, relations.cols)
        self._torsion_pos = tuple(j for j, x in enumerate(diag) if x >= 2)
        self._free_pos = tuple(
            j for j in range(relations.cols) if j >= len(diag) or diag[j] == 0
        )

    @property
    def ngens(self) -> int:
        return len(self.generators)

    def coordinate_positions(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return self._torsion_pos, self._free_pos

    def class_of(self, vec: Sequence[int]) -> tuple[int, ...]:
        """Canonical coordinates of an ambient integer vector."""
        if len(vec) != self.ngens:
            raise ValueError("ambient vector length mismatch")
        z = self.snf.v.vec_mat(vec)
        diag = self.snf.diagonal
        coords = [z[j] % diag[j] for j in self._torsion_pos]
        coords.extend(z[j] for j in self._free_pos)
        return tuple(coords)

    def section(self, i: int) -> tuple[int, ...]:
        """An ambient vector whose class is the i-th canonical basis element."""
        pos = (self._torsion_pos + self._free_pos)[i]
        return self.snf.v_inv.row(pos)

    def lattice_contains(self, vec: Sequence[int]) -> bool:
        """Is ``vec`` in the row lattice of the relations?"""
        if len(vec) != self.ngens:
            raise ValueError("ambient vector length mismatch")
        z = self.snf.v.vec_mat(vec)
        diag = self.snf.diagonal
        for j, x in enumerate(z):
            if j < len(diag) and diag[j] != 0:
                if x % diag[j]:
                    return False
            elif x != 0:
                return False
        return True

    def same_as(self, other: "Presentation") -> bool:
        return self.generators == other.generators and self.relations == other.relations


class FgAbelianGroup:
    """A finitely generated abelian group in invariant-factor form.

    ``invariant_factors`` are the torsion orders, each >= 2 and each dividing
    the next; ``free_rank`` counts the Z summands.  The canonical pair is the
    unique comparison key: two groups are isomorphic iff the pairs agree.
    Every group carries a presentation; groups built straight from canonical
    data get the diagonal one.
    """

    __slots__ = ("free_rank", "invariant_factors", "presentation")

    def __init__(
        self,
        free_rank: int,
        invariant_factors: Sequence[int],
        presentation: Presentation | None = None,
    ):
        factors = tuple(int(x) for x in invariant_factors)
        for x in factors:
            if x < 2:
                raise ValueError("invariant factors must be >= 2")
        for x, y in zip(factors, factors[1:]):
            if y % x:
                raise ValueError("invariant factors must be in divisibility order")
        if free_rank < 0:
            raise ValueError("free rank must be nonnegative")
        if presentation is None:
            n = len(factors) + free_rank
            gens = tuple(f"g{i + 1}" for i in range(n))
            rel = IntMatrix.from_rows(
                [[factors[i] if j == i else 0 for j in range(n)] for i in range(len(factors))],
                cols=n,
            )
            presentation = Presentation(gens, rel)
        else:
            if (presentation.free_rank, presentation.invariant_factors) != (
                free_rank,
                factors,
            ):
                raise ValueError("presentation does not canonicalize to the stated form")
        self.free_rank = free_rank
        self.invariant_factors = factors
        self.presentation = presentation

    # -- constructors ------------------------------------------------------

    @classmethod
    def canonical(cls, free_rank: int, invariant_factors: Sequence[int] = ()) -> "FgAbelianGroup":
        return cls(free_rank, invariant_factors)

    @classmethod
    def trivial(cls) -> "FgAbelianGroup":
        return cls(0, ())

    @classmethod
    def from_presentation(cls, presentation: Presentation) -> "FgAbelianGroup":
        return cls(presentation.free_rank, presentation.invariant_factors, presentation)

    # -- structure ---------------------------------------------------------

    @property
    def rank(self) -> int:
        return self.free_rank

    @property
    def is_trivial(self) -> bool:
        return self.free_rank == 0 and not self.invariant_factors

    @property
    def ncoords(self) -> int:
        return len(self.invariant_factors) + self.free_rank

    def canonical_pair(self) -> tuple[int, tuple[int, ...]]:
        return (self.free_rank, self.invariant_factors)

    def is_isomorphic_to(self, other: "FgAbelianGroup") -> bool:
        return self.canonical_pair() == other.canonical_pair()

    def __eq__(self, other) -> bool:
        # equality is isomorphism-class equality; presentations may differ
        return isinstance(other, FgAbelianGroup) and self.canonical_pair() == other.canonical_pair()

    def __hash__(self):
        return hash(self.canonical_pair())

    def __repr__(self):
        return f"FgAbelianGroup({format_group(self)!r})"

    # -- element arithmetic in canonical coordinates ------------------------

    def reduce_coords(self, coords: Sequence[int]) -> tuple[int, ...]:
        if len(coords) != self.ncoords:
            raise ValueError("coordinate length mismatch")
        out = []
        for i, x in enumerate(coords):
            if i < len(self.invariant_factors):
                out.append(x % self.invariant_factors[i])
            else:
                out.append(x)
        return tuple(out)

    def add_coords(self, a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
        return self.reduce_coords([x + y for x, y in zip(a, b)])

    def scale_coords(self, n: int, a: Sequence[int]) -> tuple[int, ...]:
        return self.reduce_coords([n * x for x in a])

    def zero_coords(self) -> tuple[int, ...]:
        return (0,) * self.ncoords

    def coords_of(self, ambient_vec: Sequence[int]) -> tuple[int, ...]:
        return self.presentation.class_of(ambient_vec)

    def element_order(self, coords: Sequence[int]) -> int:
        """Order of the element (0 means infinite)."""
        coords = self.reduce_coords(coords)
        nfac = len(self.invariant_factors)
        if any(coords[nfac:]):
            return 0
        order = 1
        for x, d in zip(coords[:nfac], self.invariant_factors):
            if x:
                g = _gcd(x, d)
                order = _lcm(order, d // g)
        return order


def _gcd(a: int, b: int) -> int:
    a, b = abs(a), abs(b)
    while b:
        a, b = b, a % b
    return a


def _lcm(a: int, b: int) -> int:
    return a * b // _gcd(a, b) if a and b else 0


def cokernel(m: IntMatrix, generators: Sequence[str] | None = None) -> FgAbelianGroup:
    """Z^cols(m) modulo the row lattice of ``m``, with a retained presentation.

    Rows of ``m`` are relations on the ambient generators.  The result's
    ``coords_of`` maps any ambient vector to canonical coordinates.
    """
    if generators is None:
        generators = tuple(f"g{i + 1}" for i in range(m.cols))
    pres = Presentation(generators, m)
    return FgAbelianGroup.from_presentation(pres)


# ---------------------------------------------------------------------------
# Integer lattices given by generators
# ---------------------------------------------------------------------------


class ColumnLattice:
    """The sublattice of Z^n generated by the columns of a matrix."""

    __slots__ = ("matrix", "snf")

    def __init__(self, matrix: IntMatrix):
        self.matrix = matrix
        self.snf = smith_normal_form(matrix)

    @property
    def ambient_dim(self) -> int:
        return self.matrix.rows

    @property
    def rank(self) -> int:
        return self.snf.rank

    def contains(self, vec: Sequence[int]) -> bool:
        w = self.snf.u.mat_vec(vec)
        diag = self.snf.diagonal
        for i, x in enumerate(w):
            if i < len(diag) and diag[i]:
                if x % diag[i]:
                    return False
            elif x:
                return False
        return True

    def solve(self, vec: Sequence[int]) -> tuple[int, ...] | None:
        """Coefficients c with matrix @ c == vec, or None if vec is outside."""
        w = self.snf.u.mat_vec(vec)
        diag = self.snf.diagonal
        y = [0] * self.matrix.cols
        for i, x in enumerate(w):
            if i < len(diag) and diag[i]:
                if x % diag[i]:
                    return None
                if i < self.matrix.cols:
                    y[i] = x // diag[i]
            elif x:
                return None
        return self.snf.v.mat_vec(y)

    def equals(self, other: "ColumnLattice") -> bool:
        if self.ambient_dim != other.ambient_dim:
            return False
        for j in range(self.matrix.cols):
            if not other.contains(self.matrix.col(j)):
                return False
        for j in range(other.matrix.cols):
            if not self.contains(other.matrix.col(j)):
                return False
        return True


# ---------------------------------------------------------------------------
# Homomorphisms
# ---------------------------------------------------------------------------


def _preimage_lattice_rows(hom_matrix: IntMatrix, codomain: Presentation) -> IntMatrix:
    """Generators (as rows) of {x : hom_matrix @ x in codomain relation lattice}."""
    rel_t = codomain.relations.transpose()
    stacked = hom_matrix.hstack(-rel_t)
    ker = kernel_basis(stacked)
    ngen = hom_matrix.cols
    rows = []
    for j in range(ker.cols):
        coljth = tuple(ker.entry(i, j) for i in range(ngen))
        rows.append(coljth)
    return IntMatrix.from_rows(rows, cols=ngen)


class GroupHom:
    """Homomorphism between presented groups.

    ``matrix`` is ngens(codomain) x ngens(domain): column j is the image of
    the j-th domain generator written in codomain generators.  The image of
    every domain relation must land in the codomain relation lattice; this is
    checked at construction (with a fast path for relations that are literal
    codomain relation rows, the common case for graph inclusions).
    """

    __slots__ = ("domain", "codomain", "matrix", "_canonical_matrix")

    def __init__(self, domain: FgAbelianGroup, codomain: FgAbelianGroup, matrix: IntMatrix):
        if matrix.cols != domain.presentation.ngens or matrix.rows != codomain.presentation.ngens:
            raise ValueError("hom matrix shape does not match the presentations")
        self.domain = domain
        self.codomain = codomain
        self.matrix = matrix
        self._canonical_matrix = None
        self._verify_well_defined()

    def _verify_well_defined(self):
        cod = self.codomain.presentation
        cod_rows = set(cod.relations.iter_rows())
        for rel in self.domain.presentation.relations.iter_rows():
            image = self.matrix.mat_vec(rel)
            if image in cod_rows:
                continue
            if not cod.lattice_contains(image):
                raise ValueError("hom is not well defined: a relation maps outside the lattice")

    # -- actions -----------------------------------------------------------

    def apply_ambient(self, vec: Sequence[int]) -> tuple[int, ...]:
        """Image (as an ambient codomain vector) of an ambient domain vector."""
        return self.matrix.mat_vec(vec)

    def canonical_matrix(self) -> IntMatrix:
        """Action on canonical coordinates (column j = image of canonical gen j)."""
        if self._canonical_matrix is None:
            dom, cod = self.domain, self.codomain
            cols = []
            for j in range(dom.ncoords):
                sec = dom.presentation.section(j)
                img = cod.presentation.class_of(self.matrix.mat_vec(sec))
                cols.append(img)
            ents = []
            for i in range(cod.ncoords):
                ents.extend(col[i] for col in cols)
            self._canonical_matrix = IntMatrix(cod.ncoords, dom.ncoords, ents)
        return self._canonical_matrix

    def apply_coords(self, coords: Sequence[int]) -> tuple[int, ...]:
        """Image in canonical coordinates of a canonical-coordinate element."""
        return self.codomain.reduce_coords(self.canonical_matrix().mat_vec(coords))

    # -- structure ---------------------------------------------------------

    @classmethod
    def identity(cls, group: FgAbelianGroup) -> "GroupHom":
        return cls(group, group, IntMatrix.identity(group.presentation.ngens))

    @classmethod
    def zero(cls, domain: FgAbelianGroup, codomain: FgAbelianGroup) -> "GroupHom":
        return cls(domain, codomain, IntMatrix.zero(codomain.presentation.ngens, domain.presentation.ngens))

    def is_surjective(self) -> bool:
        stacked = self.codomain.presentation.relations.vstack(self.matrix.transpose())
        free, factors = _canonical_from_diagonal(
            smith_normal_form(stacked).diagonal, self.codomain.presentation.ngens
        )
        return free == 0 and not factors

    def is_injective(self) -> bool:
        pre = _preimage_lattice_rows(self.matrix, self.codomain.presentation)
        dom = self.domain.presentation
        return all(dom.lattice_contains(row) for row in pre.iter_rows())

    def is_isomorphism(self) -> bool:
        return self.is_surjective() and self.is_injective()

    def image_rank(self) -> int:
        stacked = self.codomain.presentation.relations.vstack(self.matrix.transpose())
        free, factors = _canonical_from_diagonal(
            smith_normal_form(stacked).diagonal, self.codomain.presentation.ngens
        )
        return self.codomain.free_rank - free

    def kernel_rank(self) -> int:
        """Free rank of the kernel subgroup."""
        return self.domain.free_rank - self.image_rank()

    def kernel_lattice_rows(self) -> IntMatrix:
        """Ambient-domain generators (rows) of the full preimage of 0."""
        return _preimage_lattice_rows(self.matrix, self.codomain.presentation)


def hom_compose(f: GroupHom, g: GroupHom) -> GroupHom:
    """g after f.  Requires f.codomain and g.domain to share a presentation."""
    if not f.codomain.presentation.same_as(g.domain.presentation):
        raise ValueError("presentation mismatch: cannot compose")
    return GroupHom(f.domain, g.codomain, g.matrix @ f.matrix)


def hom_is_isomorphism(f: GroupHom) -> bool:
    return f.is_isomorphism()


# ---------------------------------------------------------------------------
# Colimits of chains
# ---------------------------------------------------------------------------


@dataclass
class ColimitResult:
    group: FgAbelianGroup
    stabilized: bool
    settled_index: int
    reduction: GroupHom  # groups[settled_index] -> group


def colimit_chain_detailed(
    groups: Sequence[FgAbelianGroup], homs: Sequence[GroupHom], window: int
) -> ColimitResult:
    """Direct-limit heuristic for a finite chain prefix.

    The reduced group at n is G_n modulo the kernel of the composite map
    G_n -> G_{n+window}; if the induced maps between consecutive reduced
    groups are isomorphisms along the final stretch (the last window+1 of
    them, or as many as the prefix affords), the last reduced group is
    reported with ``stabilized=True``.  A False flag means the prefix is too
    short to certify anything.
    """
    n = len(groups)
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(homs) != n - 1:
        raise ValueError("need exactly len(groups)-1 homs")
    if n < window + 2:
        raise ValueError(f"chain of length {n} is too short for window {window}")
    for i, h in enumerate(homs):
        if not h.domain.presentation.same_as(groups[i].presentation) or not h.codomain.presentation.same_as(
            groups[i + 1].presentation
        ):
            raise ValueError(f"hom {i} does not connect groups {i} -> {i + 1}")

    last = n - 1 - window
    reduced: list[FgAbelianGroup] = []
    for i in range(last + 1):
        comp = homs[i]
        for j in range(i + 1, i + window):
            comp = hom_compose(comp, homs[j])
        pre = _preimage_lattice_rows(comp.matrix, groups[i + window].presentation)
        rel = groups[i].presentation.relations.vstack(pre)
        reduced.append(cokernel(rel, groups[i].presentation.generators))

    checks = min(window + 1, last)
    stabilized = True
    for i in range(last - checks, last):
        induced = GroupHom(reduced[i], reduced[i + 1], homs[i].matrix)
        if not induced.is_isomorphism():
            stabilized = False
            break

    reduction = GroupHom(
        groups[last], reduced[last], IntMatrix.identity(groups[last].presentation.ngens)
    )
    return ColimitResult(reduced[last], stabilized, last, reduction)


def colimit_chain(
    groups: Sequence[FgAbelianGroup], homs: Sequence[GroupHom], window: int
) -> tuple[FgAbelianGroup, bool]:
    res = colimit_chain_detailed(groups, homs, window)
    return res.group, res.stabilized


# ---------------------------------------------------------------------------
# Group expression grammar
# ---------------------------------------------------------------------------


def parse_group_expr(text: str) -> FgAbelianGroup:
    """Parse ``term ( "+" term )*`` with term = Z | Z^k | Z/n; "0" is trivial.

    The result is normalized to invariant-factor form, so e.g. Z/2 + Z/3
    comes back as Z/6 while Z/2 + Z/4 keeps both factors.
    """
    s = text.strip()
    if not s:
        raise ValueError("empty group expression")
    if s == "0":
        return FgAbelianGroup.trivial()
    free = 0
    torsion: list[int] = []
    for raw in s.split("+"):
        term = raw.strip()
        if not term:
            raise ValueError(f"syntax error in group expression: {text!r}")
        if term == "Z":
            free += 1
        elif term.startswith("Z^"):
            try:
                k = int(term[2:])
            except ValueError:
                raise ValueError(f"syntax error in term {term!r}") from None
            if k < 1:
                raise ValueError(f"free power must be >= 1 in {term!r}")
            free += k
        elif term.startswith("Z/"):
            try:
                nval = int(term[2:])
            except ValueError:
                raise ValueError(f"syntax error in term {term!r}") from None
            if nval < 2:
                raise ValueError(f"torsion order must be >= 2 in {term!r}")
            torsion.append(nval)
        else:
            raise ValueError(f"syntax error in term {term!r}")
    factors: tuple[int, ...] = ()
    if torsion:
        snf = smith_normal_form(IntMatrix.diagonal(torsion))
        factors = tuple(x for x in snf.diagonal if x >= 2)
    return FgAbelianGroup.canonical(free, factors)


def format_group(group: FgAbelianGroup) -> str:
    """Canonical text form: free part first, torsion in divisibility order."""
    terms = []
    if group.free_rank == 1:
        terms.append("Z")
    elif group.free_rank > 1:
        terms.append(f"Z^{group.free_rank}")
    terms.extend(f"Z/{n}" for n in group.invariant_factors)
    return " + ".join(terms) if terms else "0"
