"""Finite Čech cohomology over nerves of good covers.

Cochains carry integer, real or circle (ℝ/ℤ) coefficients. Circle values are stored as
`Fraction` whenever the data is rational, so cocycle identities are checked exactly; float
values fall back to a 1e-9 tolerance.

A circle cochain can be *sampled*: its values are then indexed by pairs (simplex, carrier),
where the carrier is any simplex containing the simplex. The carrier plays the role of a
sample point in the corresponding intersection of patches, which is what lets a circle
1-cocycle with real lifts of non-constant transition functions (a line bundle of non-zero
degree) live on a finite nerve.
"""
import enum
import logging
from decimal import Decimal
from fractions import Fraction

import numpy as np

from tkindex.utils import (
    CoefficientError,
    StructuralError,
    ValidationError,
    ComputationError,
    format_rational,
    mod_one,
)


logger = logging.getLogger(__name__)

FLOAT_TOLERANCE = 1e-9

# longer expansions are written as "p/q"
MAX_DECIMAL_DIGITS = 24


class ManifoldTag(enum.Enum):
    POINT = "Point"
    CIRCLE = "Circle"
    SPHERE2 = "Sphere2"
    TORUS2 = "Torus2"
    CIRCLE_TIMES_SPHERE2 = "CircleTimesSphere2"
    TORUS3 = "Torus3"


class CoefficientGroup(enum.Enum):
    INTEGER = "Z"
    REAL = "R"
    CIRCLE = "U1"


class Nerve:
    """Nerve of a finite cover, stored as an ordered simplicial complex.

    Attributes:
        vertex_count (int): number of patches
        simplices (dict): degree -> tuple of strictly increasing vertex tuples
        manifold_tag (ManifoldTag): which catalog cover the nerve encodes, if any
        factors (tuple): factor nerves when the nerve is an ordered product
        vertex_labels (tuple): per vertex, the tuple of factor vertices (products only)
    """

    def __init__(
        self, vertex_count, simplices, manifold_tag=None, factors=(), vertex_labels=None
    ):
        self.vertex_count = int(vertex_count)
        self.simplices = {
            int(degree): tuple(tuple(int(v) for v in simplex) for simplex in listed)
            for degree, listed in simplices.items()
            if len(listed)
        }
        if self.vertex_count and 0 not in self.simplices:
            self.simplices[0] = tuple((v,) for v in range(self.vertex_count))
        self.manifold_tag = manifold_tag
        self.factors = tuple(factors)
        self.vertex_labels = vertex_labels
        self._carriers = {}
        self._homology_bases = {}
        self.validate()

    def validate(self):
        if self.vertex_count < 0:
            raise ValidationError("Negative vertex count")
        if self.vertex_count and set(self.simplices[0]) != {
            (v,) for v in range(self.vertex_count)
        }:
            raise ValidationError("Degree-0 simplices must enumerate all vertices")
        for degree, listed in self.simplices.items():
            for simplex in listed:
                if len(simplex) != degree + 1:
                    raise ValidationError(
                        "Simplex listed in degree {}".format(degree), simplex=simplex
                    )
                if any(a >= b for a, b in zip(simplex, simplex[1:])):
                    raise ValidationError(
                        "Simplex is not strictly increasing", simplex=simplex
                    )
                if simplex[0] < 0 or simplex[-1] >= self.vertex_count:
                    raise ValidationError("Unknown vertex", simplex=simplex)
                if degree > 0:
                    for face in faces(simplex):
                        if face not in self.simplex_set:
                            raise ValidationError(
                                "Face {} is not listed".format(face), simplex=simplex
                            )

    @property
    def dimension(self):
        return max(self.simplices) if self.simplices else -1

    @property
    def simplex_set(self):
        try:
            return self._simplex_set
        except AttributeError:
            self._simplex_set = {
                simplex for listed in self.simplices.values() for simplex in listed
            }
            return self._simplex_set

    def simplices_of(self, degree):
        return self.simplices.get(degree, ())

    def count(self, degree):
        return len(self.simplices_of(degree))

    def index_of(self, degree):
        return {simplex: i for i, simplex in enumerate(self.simplices_of(degree))}

    def carriers(self, simplex):
        """All simplices of every degree that contain `simplex`, ordered by degree."""
        simplex = tuple(simplex)
        if simplex not in self._carriers:
            vertices = set(simplex)
            self._carriers[simplex] = tuple(
                candidate
                for degree in sorted(self.simplices)
                if degree >= len(simplex) - 1
                for candidate in self.simplices[degree]
                if vertices.issubset(candidate)
            )
        return self._carriers[simplex]

    def product(self, other, manifold_tag=None):
        """Ordered product triangulation; vertex (i, a) gets index i * |other| + a."""
        width = other.vertex_count
        left = self.simplex_set
        right = other.simplex_set
        collected = {}

        def extend(chain):
            labels = tuple(i * width + a for i, a in chain)
            collected.setdefault(len(chain) - 1, []).append(labels)
            last_i, last_a = chain[-1]
            for i in range(last_i, self.vertex_count):
                for a in range(last_a, width):
                    if (i, a) == (last_i, last_a):
                        continue
                    lefts = tuple(sorted({p for p, _q in chain} | {i}))
                    rights = tuple(sorted({q for _p, q in chain} | {a}))
                    if lefts in left and rights in right:
                        extend(chain + [(i, a)])

        for i in range(self.vertex_count):
            for a in range(width):
                extend([(i, a)])

        return Nerve(
            self.vertex_count * width,
            {degree: sorted(listed) for degree, listed in collected.items()},
            manifold_tag=manifold_tag,
            factors=(self, other),
            vertex_labels=tuple(
                (i, a) for i in range(self.vertex_count) for a in range(width)
            ),
        )

    def __repr__(self):
        return "<Nerve {} vertices={} dim={}>".format(
            self.manifold_tag.value if self.manifold_tag else "-",
            self.vertex_count,
            self.dimension,
        )


def faces(simplex):
    return [simplex[:i] + simplex[i + 1 :] for i in range(len(simplex))]


def _normalize(coefficients, value):
    if coefficients is CoefficientGroup.CIRCLE:
        return mod_one(value)
    if coefficients is CoefficientGroup.INTEGER:
        if isinstance(value, Fraction) and value.denominator != 1:
            raise ValidationError("Non-integral value {} in integer cochain".format(value))
        return int(value)
    return value


def _is_zero(coefficients, value):
    if coefficients is CoefficientGroup.CIRCLE:
        if isinstance(value, Fraction):
            return mod_one(value) == 0
        reduced = mod_one(value)
        return min(reduced, 1 - reduced) <= FLOAT_TOLERANCE
    if isinstance(value, float):
        return abs(value) <= FLOAT_TOLERANCE
    return value == 0


class CechCochain:
    """Degree-k cochain on a nerve.

    Attributes:
        degree (int)
        coefficients (CoefficientGroup)
        values (dict): simplex -> value, or (simplex, carrier) -> value when `sampled`
        sampled (bool)
        lifts (dict): optional real lifts of circle values, same keys as `values`
    """

    def __init__(self, degree, coefficients, values, sampled=False, lifts=None):
        self.degree = int(degree)
        self.coefficients = coefficients
        self.sampled = sampled
        self.values = {
            key: _normalize(coefficients, value) for key, value in values.items()
        }
        self.lifts = dict(lifts) if lifts is not None else None

    @classmethod
    def zero(cls, nerve, degree, coefficients=CoefficientGroup.INTEGER):
        return cls(
            degree, coefficients, {s: 0 for s in nerve.simplices_of(degree)}
        )

    @classmethod
    def from_vector(cls, nerve, degree, vector, coefficients=CoefficientGroup.INTEGER):
        return cls(
            degree,
            coefficients,
            dict(zip(nerve.simplices_of(degree), (v for v in vector))),
        )

    def value(self, simplex, carrier=None):
        if self.sampled:
            return self.values[(tuple(simplex), tuple(carrier))]
        return self.values[tuple(simplex)]

    def lift(self, simplex, carrier=None):
        key = (tuple(simplex), tuple(carrier)) if self.sampled else tuple(simplex)
        if self.lifts is not None:
            return self.lifts[key]
        return self.values[key]

    def vector(self, nerve):
        if self.sampled:
            raise StructuralError("Sampled cochains have no plain coefficient vector")
        return [self.values[s] for s in nerve.simplices_of(self.degree)]

    def check_shape(self, nerve):
        expected = set()
        for simplex in nerve.simplices_of(self.degree):
            if self.sampled:
                expected.update((simplex, c) for c in nerve.carriers(simplex))
            else:
                expected.add(simplex)
        if set(self.values) != expected:
            raise StructuralError(
                "Degree-{} cochain does not match the simplices of {!r}".format(
                    self.degree, nerve
                )
            )

    def is_zero(self):
        return all(_is_zero(self.coefficients, v) for v in self.values.values())

    def scaled(self, factor):
        lifts = None
        if self.lifts is not None:
            lifts = {key: factor * value for key, value in self.lifts.items()}
        return CechCochain(
            self.degree,
            self.coefficients,
            {key: factor * value for key, value in self.values.items()},
            sampled=self.sampled,
            lifts=lifts,
        )

    def __neg__(self):
        return self.scaled(-1)

    def __add__(self, other):
        if (
            self.degree != other.degree
            or self.coefficients is not other.coefficients
            or self.sampled != other.sampled
        ):
            raise StructuralError("Cannot add cochains of different kinds")
        lifts = None
        if self.lifts is not None and other.lifts is not None:
            lifts = {key: self.lifts[key] + other.lifts[key] for key in self.lifts}
        return CechCochain(
            self.degree,
            self.coefficients,
            {key: self.values[key] + other.values[key] for key in self.values},
            sampled=self.sampled,
            lifts=lifts,
        )

    def __sub__(self, other):
        return self + (-other)

    def __repr__(self):
        return "<CechCochain degree={} {}{}>".format(
            self.degree, self.coefficients.value, " sampled" if self.sampled else ""
        )


def _alternating_sum(values, signs):
    total = 0
    for sign, value in zip(signs, values):
        total = total + sign * value
    return total


def coboundary(c, n):
    """Alternating-sum coboundary. Sampled cochains are differentiated carrier by carrier."""
    target = c.degree + 1
    if c.degree not in n.simplices or target not in n.simplices:
        raise StructuralError(
            "No degree-{} simplices for the coboundary of a degree-{} cochain on {!r}".format(
                target, c.degree, n
            )
        )
    c.check_shape(n)
    signs = [(-1) ** i for i in range(target + 1)]
    values = {}
    lifts = {} if (c.lifts is not None) else None
    for simplex in n.simplices_of(target):
        simplex_faces = faces(simplex)
        keys = (
            [(carrier, [(face, carrier) for face in simplex_faces]) for carrier in n.carriers(simplex)]
            if c.sampled
            else [(None, simplex_faces)]
        )
        for carrier, face_keys in keys:
            key = (simplex, carrier) if c.sampled else simplex
            values[key] = _alternating_sum([c.values[k] for k in face_keys], signs)
            if lifts is not None:
                lifts[key] = _alternating_sum([c.lifts[k] for k in face_keys], signs)
    return CechCochain(target, c.coefficients, values, sampled=c.sampled, lifts=lifts)


def is_cocycle(c, n):
    if c.degree + 1 not in n.simplices:
        return True
    return coboundary(c, n).is_zero()


def _check_cocycle(c, n, what):
    if c.degree + 1 not in n.simplices:
        return
    for key, value in coboundary(c, n).values.items():
        if not _is_zero(c.coefficients, value):
            simplex = key[0] if c.sampled else key
            raise ValidationError("{} is not a cocycle".format(what), simplex=simplex)


def coboundary_matrix(n, degree):
    """Integer matrix of the coboundary C^degree -> C^(degree+1), rows indexed by (degree+1)-simplices."""
    rows = n.simplices_of(degree + 1)
    columns = n.index_of(degree)
    matrix = np.zeros((len(rows), len(columns)), dtype=object)
    for r, simplex in enumerate(rows):
        for i, face in enumerate(faces(simplex)):
            matrix[r, columns[face]] += (-1) ** i
    return matrix


class SmithForm:
    """P @ A @ Q == D with P, Q unimodular; `left_inverse` is P^-1."""

    def __init__(self, diagonal, left, left_inverse, right, shape):
        self.diagonal = diagonal
        self.left = left
        self.left_inverse = left_inverse
        self.right = right
        self.shape = shape

    @property
    def rank(self):
        return len(self.diagonal)


def smith_normal_form(matrix):
    """Smith normal form over the integers with the transformation matrices.

    Pure Python integer arithmetic, so entries never overflow.
    """
    matrix = np.asarray(matrix, dtype=object)
    rows, cols = matrix.shape
    A = [[int(x) for x in row] for row in matrix]
    P = [[int(i == j) for j in range(rows)] for i in range(rows)]
    P_inv = [[int(i == j) for j in range(rows)] for i in range(rows)]
    Q = [[int(i == j) for j in range(cols)] for i in range(cols)]

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        P[i], P[j] = P[j], P[i]
        for row in P_inv:
            row[i], row[j] = row[j], row[i]

    def swap_cols(i, j):
        for row in A:
            row[i], row[j] = row[j], row[i]
        for row in Q:
            row[i], row[j] = row[j], row[i]

    def add_row(target, source, factor):
        A[target] = [a + factor * b for a, b in zip(A[target], A[source])]
        P[target] = [a + factor * b for a, b in zip(P[target], P[source])]
        for row in P_inv:
            row[source] -= factor * row[target]

    def add_col(target, source, factor):
        for row in A:
            row[target] += factor * row[source]
        for row in Q:
            row[target] += factor * row[source]

    def negate_row(i):
        A[i] = [-a for a in A[i]]
        P[i] = [-a for a in P[i]]
        for row in P_inv:
            row[i] = -row[i]

    t = 0
    while t < min(rows, cols):
        pivot = None
        for i in range(t, rows):
            for j in range(t, cols):
                if A[i][j] and (pivot is None or abs(A[i][j]) < abs(A[pivot[0]][pivot[1]])):
                    pivot = (i, j)
        if pivot is None:
            break
        if pivot[0] != t:
            swap_rows(t, pivot[0])
        if pivot[1] != t:
            swap_cols(t, pivot[1])

        while True:
            changed = False
            for i in range(t + 1, rows):
                if A[i][t]:
                    add_row(i, t, -(A[i][t] // A[t][t]))
                    changed = changed or bool(A[i][t])
            for j in range(t + 1, cols):
                if A[t][j]:
                    add_col(j, t, -(A[t][j] // A[t][t]))
                    changed = changed or bool(A[t][j])
            if changed:
                best = (abs(A[t][t]), t, t)
                for i in range(t + 1, rows):
                    if A[i][t] and abs(A[i][t]) < best[0]:
                        best = (abs(A[i][t]), i, t)
                for j in range(t + 1, cols):
                    if A[t][j] and abs(A[t][j]) < best[0]:
                        best = (abs(A[t][j]), t, j)
                if best[1] != t:
                    swap_rows(t, best[1])
                if best[2] != t:
                    swap_cols(t, best[2])
                continue
            offender = next(
                (
                    i
                    for i in range(t + 1, rows)
                    for j in range(t + 1, cols)
                    if A[i][j] % A[t][t]
                ),
                None,
            )
            if offender is None:
                break
            add_row(t, offender, 1)

        if A[t][t] < 0:
            negate_row(t)
        t += 1

    diagonal = [A[i][i] for i in range(min(rows, cols)) if A[i][i]]
    as_array = lambda rows_: np.array(rows_, dtype=object).reshape(len(rows_), -1)  # noqa: E731
    return SmithForm(
        diagonal,
        as_array(P) if rows else np.zeros((0, 0), dtype=object),
        as_array(P_inv) if rows else np.zeros((0, 0), dtype=object),
        as_array(Q) if cols else np.zeros((0, 0), dtype=object),
        (rows, cols),
    )


class CohomologyGroup:
    def __init__(self, free_rank, torsion=()):
        self.free_rank = int(free_rank)
        self.torsion = [int(t) for t in torsion]

    def __eq__(self, other):
        return (self.free_rank, self.torsion) == (other.free_rank, other.torsion)

    def __repr__(self):
        return "<CohomologyGroup free_rank={} torsion={}>".format(
            self.free_rank, self.torsion
        )


def cohomology(n, k, coeff=CoefficientGroup.INTEGER):
    """H^k of the nerve by Smith normal form (integers) or rank arithmetic (reals)."""
    if n.vertex_count == 0:
        raise StructuralError("Cohomology of an empty nerve")
    if k < 0:
        raise StructuralError("Negative degree {}".format(k))
    if coeff is CoefficientGroup.CIRCLE:
        raise StructuralError(
            "Circle coefficients are handled through the Bockstein to integer classes"
        )
    dim_k = n.count(k)
    upper = coboundary_matrix(n, k)
    lower = coboundary_matrix(n, k - 1) if k > 0 else np.zeros((dim_k, 0), dtype=object)

    if coeff is CoefficientGroup.REAL:
        rank = lambda m: int(np.linalg.matrix_rank(m.astype(float))) if m.size else 0  # noqa: E731
        return CohomologyGroup(dim_k - rank(upper) - rank(lower))

    upper_form = smith_normal_form(upper)
    lower_form = smith_normal_form(lower)
    logger.debug(
        "H^%s of %r: coboundary ranks %s/%s", k, n, upper_form.rank, lower_form.rank
    )
    return CohomologyGroup(
        dim_k - upper_form.rank - lower_form.rank,
        [d for d in lower_form.diagonal if d > 1],
    )


def homology_basis(n, k):
    """Integer vectors on k-simplices spanning the free part of H_k.

    Pairing a cocycle against these cycles gives its coordinates with respect to the dual
    basis of the free part of H^k.
    """
    if k in n._homology_bases:
        return n._homology_bases[k]
    dim_k = n.count(k)
    boundary_upper = coboundary_matrix(n, k).T
    upper_form = smith_normal_form(boundary_upper)
    complement = upper_form.left_inverse[:, upper_form.rank:] if dim_k else np.zeros((0, 0), dtype=object)

    if k > 0:
        boundary_lower = coboundary_matrix(n, k - 1).T
    else:
        boundary_lower = np.zeros((0, dim_k), dtype=object)
    restricted = boundary_lower.dot(complement) if complement.size else np.zeros(
        (boundary_lower.shape[0], complement.shape[1]), dtype=object
    )
    kernel_form = smith_normal_form(restricted)
    kernel = kernel_form.right[:, kernel_form.rank:]
    basis = [
        [int(x) for x in complement.dot(kernel[:, j])]
        for j in range(kernel.shape[1])
    ]
    n._homology_bases[k] = basis
    return basis


def class_coordinates(z, n):
    """Coordinates of the integer cocycle `z` in the dual basis of `homology_basis`."""
    if z.coefficients is not CoefficientGroup.INTEGER or z.sampled:
        raise ValidationError("Class coordinates need a plain integer cochain")
    z.check_shape(n)
    _check_cocycle(z, n, "Integer cochain")
    vector = z.vector(n)
    return tuple(
        int(sum(a * b for a, b in zip(vector, cycle)))
        for cycle in homology_basis(n, z.degree)
    )


_CUP_GROUPS = {
    (CoefficientGroup.INTEGER, CoefficientGroup.INTEGER): CoefficientGroup.INTEGER,
    (CoefficientGroup.INTEGER, CoefficientGroup.REAL): CoefficientGroup.REAL,
    (CoefficientGroup.REAL, CoefficientGroup.INTEGER): CoefficientGroup.REAL,
    (CoefficientGroup.REAL, CoefficientGroup.REAL): CoefficientGroup.REAL,
    (CoefficientGroup.INTEGER, CoefficientGroup.CIRCLE): CoefficientGroup.CIRCLE,
    (CoefficientGroup.CIRCLE, CoefficientGroup.INTEGER): CoefficientGroup.CIRCLE,
}


def cup(p, q, n):
    """Alexander–Whitney cup product (front face of p times back face of q)."""
    try:
        group = _CUP_GROUPS[(p.coefficients, q.coefficients)]
    except KeyError:
        raise CoefficientError(
            "Cannot pair {} with {} coefficients".format(
                p.coefficients.value, q.coefficients.value
            )
        )
    p.check_shape(n)
    q.check_shape(n)
    degree = p.degree + q.degree
    sampled = p.sampled or q.sampled
    track_lifts = group is CoefficientGroup.CIRCLE and (
        p.lifts is not None or q.lifts is not None or not sampled
    )
    values = {}
    lifts = {} if track_lifts else None
    for simplex in n.simplices_of(degree):
        front = simplex[: p.degree + 1]
        back = simplex[p.degree :]
        for carrier in n.carriers(simplex) if sampled else (None,):
            key = (simplex, carrier) if sampled else simplex
            p_key = (front, carrier) if p.sampled else front
            q_key = (back, carrier) if q.sampled else back
            values[key] = p.values[p_key] * q.values[q_key]
            if lifts is not None:
                lifts[key] = p.lift(*_split(p_key, p.sampled)) * q.lift(
                    *_split(q_key, q.sampled)
                )
    return CechCochain(degree, group, values, sampled=sampled, lifts=lifts)


def _split(key, sampled):
    return key if sampled else (key,)


def _antisymmetric(values, vertices):
    """Value of a cochain on an arbitrarily ordered vertex tuple (0 if a vertex repeats)."""
    if len(set(vertices)) < len(vertices):
        return 0
    order = sorted(range(len(vertices)), key=lambda i: vertices[i])
    inversions = sum(
        1 for a in range(len(order)) for b in range(a + 1, len(order)) if order[a] > order[b]
    )
    value = values[tuple(sorted(vertices))]
    return -value if inversions % 2 else value


class CircleValuedMap:
    """A circle-valued map given by real lifts f_j per patch with integer jumps n_jk = f_j - f_k.

    `local_lifts[j]` maps each carrier containing j (a sample point of patch j) to f_j there.
    """

    def __init__(self, nerve, local_lifts, transitions):
        self.nerve = nerve
        self.local_lifts = {
            j: {tuple(c): Fraction(v) for c, v in lifts.items()}
            for j, lifts in local_lifts.items()
        }
        self.transitions = transitions
        self.validate()

    def validate(self):
        n = self.nerve
        if (
            self.transitions.degree != 1
            or self.transitions.coefficients is not CoefficientGroup.INTEGER
            or self.transitions.sampled
        ):
            raise ValidationError("Transitions must be a plain integer 1-cochain")
        self.transitions.check_shape(n)
        _check_cocycle(self.transitions, n, "Transition cochain")
        for j, k in n.simplices_of(1):
            for carrier in n.carriers((j, k)):
                difference = self.local_lifts[j][carrier] - self.local_lifts[k][carrier]
                if difference != self.transitions.values[(j, k)]:
                    raise ValidationError(
                        "f_j - f_k = {} does not match n_jk = {}".format(
                            difference, self.transitions.values[(j, k)]
                        ),
                        simplex=(j, k),
                    )

    @classmethod
    def from_transitions(cls, nerve, transitions):
        """Partition-of-unity lift: f_j at carrier τ is the mean of n_jl over l in τ."""
        local_lifts = {}
        for j in range(nerve.vertex_count):
            local_lifts[j] = {
                carrier: Fraction(
                    sum(_antisymmetric(transitions.values, (j, l)) for l in carrier),
                    len(carrier),
                )
                for carrier in nerve.carriers((j,))
            }
        return cls(nerve, local_lifts, transitions)

    def rebranch(self, shifts):
        """Adds the integer shifts[j] to f_j; the transitions change by a coboundary."""
        local_lifts = {
            j: {c: v + shifts.get(j, 0) for c, v in lifts.items()}
            for j, lifts in self.local_lifts.items()
        }
        transitions = CechCochain(
            1,
            CoefficientGroup.INTEGER,
            {
                (j, k): value + shifts.get(j, 0) - shifts.get(k, 0)
                for (j, k), value in self.transitions.values.items()
            },
        )
        return CircleValuedMap(self.nerve, local_lifts, transitions)


def line_bundle_cocycle(b, n):
    """Sampled circle 1-cocycle of the line bundle with integral Chern cocycle `b`.

    The real lift at carrier τ is the mean over l in τ of b(l, j, k), so its coboundary is
    exactly `b` at every carrier.
    """
    if b.degree != 2 or b.coefficients is not CoefficientGroup.INTEGER or b.sampled:
        raise ValidationError("A line bundle cocycle needs a plain integer 2-cochain")
    b.check_shape(n)
    _check_cocycle(b, n, "Chern cochain")
    lifts = {}
    for j, k in n.simplices_of(1):
        for carrier in n.carriers((j, k)):
            lifts[((j, k), carrier)] = Fraction(
                sum(_antisymmetric(b.values, (l, j, k)) for l in carrier) if b.values else 0,
                len(carrier),
            )
    return CechCochain(1, CoefficientGroup.CIRCLE, lifts, sampled=True, lifts=lifts)


def twist_by_coboundary(c, g, n):
    """c + δg for a circle 1-cochain c and a real 0-cochain g, keeping the lifts consistent."""
    shift = coboundary(g, n)
    values = {}
    lifts = {}
    for key in c.values:
        simplex = key[0] if c.sampled else key
        values[key] = c.values[key] + shift.values[simplex]
        lifts[key] = c.lift(*_split(key, c.sampled)) + shift.values[simplex]
    return CechCochain(
        c.degree, CoefficientGroup.CIRCLE, values, sampled=c.sampled, lifts=lifts
    )


def dd_cocycle(u, c, n):
    """Dixmier–Douady circle 2-cocycle d_ijk = -n_ij θ_jk of the decomposable twist (u, L)."""
    if c.coefficients is not CoefficientGroup.CIRCLE or c.degree != 1:
        raise ValidationError("The line bundle cocycle must be a circle 1-cochain")
    if u.nerve is not n and u.nerve.simplices != n.simplices:
        raise ValidationError("The circle-valued map lives on a different cover")
    c.check_shape(n)
    _check_cocycle(c, n, "Line bundle cocycle")
    return -cup(u.transitions, c, n)


def bockstein(d, n):
    """Integer cocycle δ(real lift of d) representing the image of [d] in integer cohomology."""
    if d.coefficients is not CoefficientGroup.CIRCLE:
        raise ValidationError("The Bockstein takes a circle cochain")
    d.check_shape(n)
    _check_cocycle(d, n, "Circle cochain")
    if d.sampled and d.lifts is None:
        raise ValidationError("A sampled circle cochain needs continuous lifts")
    target = d.degree + 1
    values = {}
    for simplex in n.simplices_of(target):
        total = 0
        for i, face in enumerate(faces(simplex)):
            total += (-1) ** i * (d.lift(face, simplex) if d.sampled else d.lift(face))
        values[simplex] = _integral(total, simplex)
    result = CechCochain(target, CoefficientGroup.INTEGER, values)
    if target + 1 in n.simplices and not is_cocycle(result, n):
        raise ComputationError(
            "Lifts are not continuous across carriers; the Bockstein is not a cocycle"
        )
    return result


def _integral(total, simplex):
    if isinstance(total, Fraction):
        if total.denominator != 1:
            raise ComputationError("Non-integral lift coboundary", simplex=simplex)
        return int(total)
    rounded = round(float(total))
    if abs(rounded - total) > FLOAT_TOLERANCE:
        raise ComputationError("Non-integral lift coboundary", simplex=simplex)
    return int(rounded)


def pullback(c, nerve, factor):
    """Pulls a cochain on `nerve.factors[factor]` back along the factor projection."""
    if not nerve.factors:
        raise StructuralError("{!r} is not a product nerve".format(nerve))
    source = nerve.factors[factor]
    c.check_shape(source)
    if c.sampled:
        raise StructuralError("Pullback of sampled cochains is not supported")
    values = {}
    for simplex in nerve.simplices_of(c.degree):
        projected = tuple(nerve.vertex_labels[v][factor] for v in simplex)
        if len(set(projected)) < len(projected):
            values[simplex] = 0
        else:
            values[simplex] = c.values[projected]
    return CechCochain(c.degree, c.coefficients, values)


def circle_nerve():
    return Nerve(3, {1: [(0, 1), (1, 2), (0, 2)]}, manifold_tag=ManifoldTag.CIRCLE)


def sphere_nerve():
    return Nerve(
        4,
        {
            1: [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
            2: [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)],
        },
        manifold_tag=ManifoldTag.SPHERE2,
    )


def point_nerve():
    return Nerve(1, {}, manifold_tag=ManifoldTag.POINT)


_NERVES = {}


def nerve_catalog(tag):
    """Minimal good-cover nerves of the catalog manifolds (built once per process)."""
    tag = ManifoldTag(tag)
    if tag not in _NERVES:
        if tag is ManifoldTag.POINT:
            nerve = point_nerve()
        elif tag is ManifoldTag.CIRCLE:
            nerve = circle_nerve()
        elif tag is ManifoldTag.SPHERE2:
            nerve = sphere_nerve()
        elif tag is ManifoldTag.TORUS2:
            nerve = circle_nerve().product(circle_nerve(), manifold_tag=tag)
        elif tag is ManifoldTag.CIRCLE_TIMES_SPHERE2:
            nerve = circle_nerve().product(sphere_nerve(), manifold_tag=tag)
        else:
            nerve = circle_nerve().product(
                nerve_catalog(ManifoldTag.TORUS2), manifold_tag=tag
            )
        _NERVES[tag] = nerve
    return _NERVES[tag]


def circle_generator(nerve):
    """Integer 1-cocycle pairing to +1 with the cycle [01] + [12] - [02]."""
    return CechCochain(
        1, CoefficientGroup.INTEGER, {(0, 1): 0, (1, 2): 0, (0, 2): -1}
    )


def sphere_generator(nerve):
    values = {s: 0 for s in nerve.simplices_of(2)}
    values[(0, 1, 2)] = 1
    return CechCochain(2, CoefficientGroup.INTEGER, values)


def torus_generator(nerve):
    return cup(
        pullback(circle_generator(nerve.factors[0]), nerve, 0),
        pullback(circle_generator(nerve.factors[1]), nerve, 1),
        nerve,
    )


def decomposable_twist_data(tag, u_winding=0, bundle_degree=0):
    """α, β, u and the line bundle cocycle c of the decomposable twist on a catalog nerve.

    Returns:
        dict with keys "nerve", "alpha", "beta", "u", "c".
    """
    tag = ManifoldTag(tag)
    nerve = nerve_catalog(tag)
    zero = lambda degree: CechCochain.zero(nerve, degree)  # noqa: E731

    if tag in (ManifoldTag.POINT, ManifoldTag.SPHERE2) and u_winding:
        raise ValidationError("H^1 vanishes; u must have winding 0", scenario=tag.value)
    if tag in (ManifoldTag.POINT, ManifoldTag.CIRCLE) and bundle_degree:
        raise ValidationError("H^2 vanishes; L must be trivial", scenario=tag.value)

    if tag in (ManifoldTag.POINT, ManifoldTag.SPHERE2):
        alpha = zero(1) if 1 in nerve.simplices else None
    elif tag is ManifoldTag.CIRCLE:
        alpha = circle_generator(nerve).scaled(u_winding)
    else:
        alpha = pullback(circle_generator(nerve.factors[0]), nerve, 0).scaled(u_winding)

    if tag is ManifoldTag.SPHERE2:
        beta = sphere_generator(nerve).scaled(bundle_degree)
    elif tag is ManifoldTag.TORUS2:
        beta = torus_generator(nerve).scaled(bundle_degree)
    elif tag is ManifoldTag.CIRCLE_TIMES_SPHERE2:
        beta = pullback(sphere_generator(nerve.factors[1]), nerve, 1).scaled(
            bundle_degree
        )
    elif tag is ManifoldTag.TORUS3:
        beta = pullback(torus_generator(nerve.factors[1]), nerve, 1).scaled(
            bundle_degree
        )
    else:
        beta = None

    data = {"nerve": nerve, "alpha": alpha, "beta": beta, "u": None, "c": None}
    if alpha is not None:
        data["u"] = CircleValuedMap.from_transitions(nerve, alpha)
    if beta is not None:
        data["c"] = line_bundle_cocycle(beta, nerve)
    elif 1 in nerve.simplices:
        data["c"] = CechCochain.zero(nerve, 1, CoefficientGroup.CIRCLE)
    return data


def _exact_decimal(value):
    """Terminating decimal expansion of a rational as a string, or None."""
    for digits in range(MAX_DECIMAL_DIGITS + 1):
        scaled = value * 10 ** digits
        if scaled.denominator == 1:
            return format(Decimal(scaled.numerator).scaleb(-digits), "f")
    return None


def _encode_value(value):
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return int(value)
        return _exact_decimal(value) or format_rational(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    return repr(float(value))


def _decode_value(value, exact):
    if isinstance(value, (int, float)):
        return value
    if "/" in value or exact:
        return Fraction(value)
    return float(value)


def _is_exact(values):
    return all(isinstance(v, (int, Fraction, np.integer)) for v in values)


def _encode_key(key, sampled):
    if sampled:
        simplex, carrier = key
        return "{}|{}".format(",".join(map(str, simplex)), ",".join(map(str, carrier)))
    return ",".join(map(str, key))


def _decode_key(text, sampled):
    parse = lambda part: tuple(int(v) for v in part.split(","))  # noqa: E731
    if sampled:
        simplex, carrier = text.split("|")
        return (parse(simplex), parse(carrier))
    return parse(text)


def nerve_to_json(nerve, cochains=()):
    """Interchange document for a nerve and cochains living on it.

    Values are JSON integers when integral and decimal strings otherwise. A cochain marked
    "exact" holds rationals: its decimals are exact expansions and read back as Fractions, and
    rationals without a terminating expansion are written "p/q".
    """
    document = {
        "vertices": nerve.vertex_count,
        "manifold_tag": nerve.manifold_tag.value if nerve.manifold_tag else None,
        "simplices": {
            str(degree): [list(s) for s in listed]
            for degree, listed in sorted(nerve.simplices.items())
            if degree > 0
        },
        "cochains": [],
    }
    for cochain in cochains:
        entry = {
            "degree": cochain.degree,
            "coeff": cochain.coefficients.value,
            "sampled": cochain.sampled,
            "exact": _is_exact(
                list(cochain.values.values()) + list((cochain.lifts or {}).values())
            ),
            "values": {
                _encode_key(k, cochain.sampled): _encode_value(v)
                for k, v in cochain.values.items()
            },
        }
        if cochain.lifts is not None:
            entry["lifts"] = {
                _encode_key(k, cochain.sampled): _encode_value(v)
                for k, v in cochain.lifts.items()
            }
        document["cochains"].append(entry)
    return document


def nerve_from_json(document):
    """Inverse of `nerve_to_json`; returns (nerve, cochains)."""
    try:
        tag = document.get("manifold_tag")
        nerve = Nerve(
            document["vertices"],
            {int(k): [tuple(s) for s in v] for k, v in document.get("simplices", {}).items()},
            manifold_tag=ManifoldTag(tag) if tag else None,
        )
        cochains = []
        for entry in document.get("cochains", []):
            sampled = entry.get("sampled", False)
            exact = entry.get("exact", False)
            lifts = entry.get("lifts")
            cochain = CechCochain(
                entry["degree"],
                CoefficientGroup(entry["coeff"]),
                {
                    _decode_key(k, sampled): _decode_value(v, exact)
                    for k, v in entry["values"].items()
                },
                sampled=sampled,
                lifts=None
                if lifts is None
                else {_decode_key(k, sampled): _decode_value(v, exact) for k, v in lifts.items()},
            )
            cochain.check_shape(nerve)
            cochains.append(cochain)
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError("Malformed nerve document: {}".format(e))
    return nerve, cochains
