"""Cubical cochain model of differential forms on product grids.

A mesh is an ordered product of grid factors. Circle factors are periodic lattices with `M`
points; sphere factors are the lattice surface of the cube [0, n]^3, radially projected onto
the unit sphere. A k-cell is a pair (anchor, dirs): an integer anchor on the concatenated
lattice axes and the strictly increasing tuple of axes the unit cube extends along.

Forms are cochains: one value (or one matrix) per oriented cell. The exterior derivative is
the cubical coboundary and the wedge product is the averaged cubical cup product, which
satisfies the Leibniz rule and graded commutativity exactly and is associative only up to a
second-order error.
"""
import itertools
import logging

import numpy as np
from scipy import sparse

from tkindex.utils import StructuralError, ValidationError, gauss_legendre


logger = logging.getLogger(__name__)

MIN_CIRCLE_POINTS = 8


class CircleGrid:
    """Periodic lattice Z/M; the ambient coordinate is t = x / M in [0, 1)."""

    kind = "circle"
    axes = 1
    dimension = 1

    def __init__(self, points):
        if points < MIN_CIRCLE_POINTS:
            raise ValidationError(
                "A circle grid needs at least {} points, got {}".format(
                    MIN_CIRCLE_POINTS, points
                )
            )
        self.points = int(points)
        self.periods = (self.points,)

    def cells(self, degree):
        if degree == 0:
            return [((x,), ()) for x in range(self.points)]
        if degree == 1:
            return [((x,), (0,)) for x in range(self.points)]
        return []

    def embed(self, y):
        return y / self.points

    def jacobian(self, y):
        return np.full(y.shape[:-1] + (1, 1), 1.0 / self.points)

    def refined(self):
        return CircleGrid(2 * self.points)

    @property
    def spacing(self):
        return 1.0 / self.points

    def __repr__(self):
        return "CircleGrid({})".format(self.points)


class SphereGrid:
    """Surface of the lattice cube [0, n]^3 projected radially onto the unit sphere."""

    kind = "sphere"
    axes = 3
    dimension = 2
    periods = (None, None, None)

    def __init__(self, n):
        if n < 1:
            raise ValidationError("Sphere lattice size must be positive")
        self.n = int(n)

    def is_surface_cell(self, anchor, dirs):
        for axis in range(3):
            if axis in dirs:
                if anchor[axis] + 1 > self.n:
                    return False
            elif not 0 <= anchor[axis] <= self.n:
                return False
        return any(
            anchor[axis] in (0, self.n) for axis in range(3) if axis not in dirs
        )

    def cells(self, degree):
        if degree > 2:
            return []
        found = []
        for dirs in itertools.combinations(range(3), degree):
            for anchor in itertools.product(range(self.n + 1), repeat=3):
                if self.is_surface_cell(anchor, dirs):
                    found.append((anchor, dirs))
        return sorted(found)

    def embed(self, y):
        c = 2.0 * y / self.n - 1.0
        return c / np.linalg.norm(c, axis=-1, keepdims=True)

    def jacobian(self, y):
        c = 2.0 * y / self.n - 1.0
        norm = np.linalg.norm(c, axis=-1, keepdims=True)
        u = c / norm
        projector = np.eye(3) - u[..., :, None] * u[..., None, :]
        return (2.0 / self.n) * projector / norm[..., None]

    def outward_axis(self, anchor, dirs):
        """(axis, ±1) of the cube face a surface 2-cell lies on."""
        (axis,) = [a for a in range(3) if a not in dirs]
        return axis, (1 if anchor[axis] == self.n else -1)

    def refined(self):
        return SphereGrid(2 * self.n)

    @property
    def spacing(self):
        return 2.0 / self.n

    def __repr__(self):
        return "SphereGrid({})".format(self.n)


class Mesh:
    """Ordered product of grid factors.

    Attributes:
        factors (tuple): CircleGrid / SphereGrid instances
        resolution (int): refinement level the mesh was built at
    """

    def __init__(self, factors, resolution=0):
        self.factors = tuple(factors)
        if not self.factors:
            raise StructuralError("A mesh needs at least one factor")
        self.resolution = resolution
        self.offsets = []
        offset = 0
        for factor in self.factors:
            self.offsets.append(offset)
            offset += factor.axes
        self.axes = offset
        self.periods = tuple(p for factor in self.factors for p in factor.periods)
        self.dimension = sum(factor.dimension for factor in self.factors)
        self._cells = {}
        self._indices = {}
        self._d = {}
        self._wedge_plans = {}

    def factor_axes(self, i):
        return tuple(range(self.offsets[i], self.offsets[i] + self.factors[i].axes))

    def cells(self, degree):
        if degree not in self._cells:
            if degree < 0 or degree > self.dimension:
                self._cells[degree] = []
            else:
                found = []
                for split in _splits(degree, [f.dimension for f in self.factors]):
                    parts = [
                        factor.cells(k) for factor, k in zip(self.factors, split)
                    ]
                    for combo in itertools.product(*parts):
                        anchor = ()
                        dirs = ()
                        for offset, (a, t) in zip(self.offsets, combo):
                            anchor += tuple(a)
                            dirs += tuple(offset + axis for axis in t)
                        found.append((anchor, dirs))
                self._cells[degree] = sorted(found)
        return self._cells[degree]

    def index(self, degree):
        if degree not in self._indices:
            self._indices[degree] = {
                cell: i for i, cell in enumerate(self.cells(degree))
            }
        return self._indices[degree]

    def count(self, degree):
        return len(self.cells(degree))

    def translate(self, anchor, axes, offsets=None):
        moved = list(anchor)
        for j, axis in enumerate(axes):
            moved[axis] += 1 if offsets is None else offsets[j]
            if self.periods[axis] is not None:
                moved[axis] %= self.periods[axis]
        return tuple(moved)

    def d_matrix(self, degree):
        """Sparse coboundary C^degree -> C^(degree+1)."""
        if degree not in self._d:
            rows, cols, vals = [], [], []
            index = self.index(degree)
            for r, (anchor, dirs) in enumerate(self.cells(degree + 1)):
                for pos, axis in enumerate(dirs):
                    rest = dirs[:pos] + dirs[pos + 1 :]
                    sign = (-1) ** pos
                    rows += [r, r]
                    cols += [
                        index[(self.translate(anchor, (axis,)), rest)],
                        index[(anchor, rest)],
                    ]
                    vals += [sign, -sign]
            self._d[degree] = sparse.csr_matrix(
                (vals, (rows, cols)),
                shape=(self.count(degree + 1), self.count(degree)),
                dtype=float,
            )
            logger.debug(
                "Assembled d_%s on %r: %s", degree, self, self._d[degree].shape
            )
        return self._d[degree]

    def embed(self, y):
        parts = [
            factor.embed(y[..., offset : offset + factor.axes])
            for factor, offset in zip(self.factors, self.offsets)
        ]
        return np.concatenate(parts, axis=-1)

    def jacobian(self, y):
        jac = np.zeros(y.shape[:-1] + (self.axes, self.axes))
        for factor, offset in zip(self.factors, self.offsets):
            block = slice(offset, offset + factor.axes)
            jac[..., block, block] = factor.jacobian(y[..., block])
        return jac

    def vertex_positions(self):
        anchors = np.array([anchor for anchor, _dirs in self.cells(0)], dtype=float)
        return self.embed(anchors)

    def refined(self):
        return Mesh([factor.refined() for factor in self.factors], self.resolution + 1)

    @property
    def spacing(self):
        return max(factor.spacing for factor in self.factors)

    def same_as(self, other):
        return self is other or (
            self.resolution == other.resolution
            and [repr(f) for f in self.factors] == [repr(f) for f in other.factors]
        )

    def __repr__(self):
        return "<Mesh {} r={}>".format(
            " x ".join(repr(f) for f in self.factors), self.resolution
        )


def _splits(total, capacities):
    if not capacities:
        if total == 0:
            yield ()
        return
    for first in range(min(total, capacities[0]) + 1):
        for rest in _splits(total - first, capacities[1:]):
            yield (first,) + rest


def shuffle_sign(first, second):
    """Sign of the permutation sorting the concatenation first + second."""
    inversions = sum(1 for a in first for b in second if a > b)
    return -1 if inversions % 2 else 1


def _wedge_plan(mesh, p, q):
    key = (p, q)
    if key not in mesh._wedge_plans:
        targets, left, right, weights = [], [], [], []
        index_p = mesh.index(p)
        index_q = mesh.index(q)
        for t, (anchor, dirs) in enumerate(mesh.cells(p + q)):
            weight = 1.0 / 2 ** len(dirs)
            for front in itertools.combinations(dirs, p):
                back = tuple(axis for axis in dirs if axis not in front)
                sign = shuffle_sign(front, back)
                for rho in itertools.product((0, 1), repeat=len(back)):
                    a_cell = (mesh.translate(anchor, back, rho), front)
                    for sigma in itertools.product((0, 1), repeat=len(front)):
                        b_cell = (mesh.translate(anchor, front, sigma), back)
                        targets.append(t)
                        left.append(index_p[a_cell])
                        right.append(index_q[b_cell])
                        weights.append(sign * weight)
        mesh._wedge_plans[key] = (
            np.array(targets, dtype=int),
            np.array(left, dtype=int),
            np.array(right, dtype=int),
            np.array(weights),
        )
    return mesh._wedge_plans[key]


def _multiply(x, y):
    if x.ndim == 1 and y.ndim == 1:
        return x * y
    if x.ndim == 1:
        return x[:, None, None] * y
    if y.ndim == 1:
        return x * y[:, None, None]
    return np.matmul(x, y)


def wedge_cochains(mesh, a, p, b, q):
    """Averaged cup product of a p-cochain and a q-cochain (vectors or matrix stacks)."""
    if p + q > mesh.dimension:
        return None
    targets, left, right, weights = _wedge_plan(mesh, p, q)
    terms = _multiply(a[left], b[right])
    weights = weights.reshape((-1,) + (1,) * (terms.ndim - 1))
    result = np.zeros((mesh.count(p + q),) + terms.shape[1:], dtype=terms.dtype)
    np.add.at(result, targets, weights * terms)
    return result


def wedge_matrix(mesh, a, p, q):
    """Sparse matrix of b -> a ∧ b from q-cochains to (p+q)-cochains, for scalar a."""
    targets, left, right, weights = _wedge_plan(mesh, p, q)
    return sparse.csr_matrix(
        (weights * a[left], (targets, right)),
        shape=(mesh.count(p + q), mesh.count(q)),
    )


class DiscreteForm:
    """Mixed-degree cochain on a mesh; missing degrees are zero.

    Components are arrays of shape (cells,) for scalar forms or (cells, r, r) for
    matrix-valued forms.
    """

    def __init__(self, mesh, components):
        self.mesh = mesh
        self.components = {}
        for degree, values in components.items():
            if values is None:
                continue
            values = np.asarray(values)
            if degree < 0 or degree > mesh.dimension:
                raise StructuralError(
                    "Degree {} does not exist on {!r}".format(degree, mesh)
                )
            if values.shape[0] != mesh.count(degree):
                raise StructuralError(
                    "Degree-{} component has {} entries for {} cells".format(
                        degree, values.shape[0], mesh.count(degree)
                    )
                )
            self.components[int(degree)] = values

    @classmethod
    def zero(cls, mesh):
        return cls(mesh, {})

    @classmethod
    def constant(cls, mesh, value=1.0):
        return cls(mesh, {0: np.full(mesh.count(0), value)})

    @classmethod
    def homogeneous(cls, mesh, degree, values):
        return cls(mesh, {degree: values})

    @property
    def degrees(self):
        return sorted(self.components)

    def component(self, degree):
        if degree in self.components:
            return self.components[degree]
        return np.zeros(self.mesh.count(degree) if 0 <= degree <= self.mesh.dimension else 0)

    def _check_mesh(self, other):
        if not self.mesh.same_as(other.mesh):
            raise StructuralError(
                "Forms live on different meshes: {!r} and {!r}".format(
                    self.mesh, other.mesh
                )
            )

    def d(self):
        result = {}
        for degree, values in self.components.items():
            if degree + 1 > self.mesh.dimension:
                continue
            matrix = self.mesh.d_matrix(degree)
            if values.ndim == 1:
                image = matrix @ values
            else:
                image = (matrix @ values.reshape(values.shape[0], -1)).reshape(
                    (matrix.shape[0],) + values.shape[1:]
                )
            result[degree + 1] = result.get(degree + 1, 0) + image
        return DiscreteForm(self.mesh, result)

    def wedge(self, other):
        self._check_mesh(other)
        result = {}
        for p, a in self.components.items():
            for q, b in other.components.items():
                product = wedge_cochains(self.mesh, a, p, b, q)
                if product is not None:
                    if p + q in result:
                        result[p + q] = result[p + q] + product
                    else:
                        result[p + q] = product
        return DiscreteForm(self.mesh, result)

    def __xor__(self, other):
        return self.wedge(other)

    def __add__(self, other):
        self._check_mesh(other)
        result = dict(self.components)
        for degree, values in other.components.items():
            result[degree] = result[degree] + values if degree in result else values
        return DiscreteForm(self.mesh, result)

    def __neg__(self):
        return DiscreteForm(self.mesh, {k: -v for k, v in self.components.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        return DiscreteForm(
            self.mesh, {k: scalar * v for k, v in self.components.items()}
        )

    __rmul__ = __mul__

    def restrict(self, degrees):
        return DiscreteForm(
            self.mesh, {k: v for k, v in self.components.items() if k in degrees}
        )

    def even(self):
        return self.restrict(range(0, self.mesh.dimension + 1, 2))

    def odd(self):
        return self.restrict(range(1, self.mesh.dimension + 1, 2))

    def trace(self):
        """Matrix trace of every component."""
        return DiscreteForm(
            self.mesh,
            {
                k: np.trace(v, axis1=1, axis2=2) if v.ndim == 3 else v
                for k, v in self.components.items()
            },
        )

    def norm(self):
        return max(
            (float(np.abs(v).max()) for v in self.components.values() if v.size),
            default=0.0,
        )

    def scaled_norm(self):
        """Max over degrees of |value| / h^degree, comparable across resolutions."""
        h = self.mesh.spacing
        return max(
            (
                float(np.abs(v).max()) / h ** k
                for k, v in self.components.items()
                if v.size
            ),
            default=0.0,
        )

    def flatten(self, degrees):
        return np.concatenate([self.component(k) for k in degrees])

    def __repr__(self):
        return "<DiscreteForm degrees={} on {!r}>".format(self.degrees, self.mesh)


class AnalyticForm:
    """Smooth form Σ coef(points) dX_axes in the ambient coordinates of a mesh.

    Each term is (callable, axes); the callable receives points of shape (..., D) and
    returns values of shape (...).
    """

    def __init__(self, degree, terms):
        self.degree = degree
        self.terms = list(terms)
        for _coef, axes in self.terms:
            if len(axes) != degree:
                raise StructuralError("Term axes do not match degree {}".format(degree))

    def __add__(self, other):
        if other.degree != self.degree:
            raise StructuralError("Cannot add analytic forms of different degrees")
        return AnalyticForm(self.degree, self.terms + other.terms)

    def scaled(self, factor):
        return AnalyticForm(
            self.degree,
            [(lambda x, f=coef: factor * f(x), axes) for coef, axes in self.terms],
        )


def de_rham(form, mesh, order=4, mask=None):
    """Integrates an analytic form over every cell with tensor Gauss–Legendre quadrature.

    Cells outside `mask` (a boolean array over the k-cells) are left at zero.

    Returns:
        DiscreteForm of pure degree `form.degree`.
    """
    k = form.degree
    nodes, weights = gauss_legendre(order)
    grid = list(itertools.product(range(order), repeat=k))
    params = np.array([[nodes[i] for i in g] for g in grid]).reshape(len(grid), k)
    quadrature = np.array([np.prod([weights[i] for i in g]) for g in grid])

    values = np.zeros(mesh.count(k))
    groups = {}
    for i, (anchor, dirs) in enumerate(mesh.cells(k)):
        if mask is not None and not mask[i]:
            continue
        groups.setdefault(dirs, []).append((i, anchor))
    for dirs, members in groups.items():
        rows = np.array([i for i, _a in members], dtype=int)
        anchors = np.array([a for _i, a in members], dtype=float)
        offsets = np.zeros((len(grid), mesh.axes))
        for j, axis in enumerate(dirs):
            offsets[:, axis] = params[:, j]
        y = anchors[:, None, :] + offsets[None, :, :]
        points = mesh.embed(y)
        tangents = mesh.jacobian(y)[..., :, list(dirs)]
        total = np.zeros(len(members))
        for coef, axes in form.terms:
            if k:
                det = np.linalg.det(tangents[..., list(axes), :])
            else:
                det = 1.0
            total += (np.asarray(coef(points)) * det) @ quadrature
        values[rows] = total
    return DiscreteForm(mesh, {k: values})


def pullback(form, mesh, factor):
    """Pulls a form on the mesh of one factor back along the projection of `mesh`."""
    source = form.mesh
    if len(source.factors) != 1 or repr(source.factors[0]) != repr(mesh.factors[factor]):
        raise StructuralError(
            "{!r} is not factor {} of {!r}".format(source, factor, mesh)
        )
    axes = mesh.factor_axes(factor)
    offset = mesh.offsets[factor]
    result = {}
    for degree, values in form.components.items():
        index = source.index(degree)
        rows, cols = [], []
        for r, (anchor, dirs) in enumerate(mesh.cells(degree)):
            if all(axis in axes for axis in dirs):
                local = (
                    tuple(anchor[a] for a in axes),
                    tuple(axis - offset for axis in dirs),
                )
                rows.append(r)
                cols.append(index[local])
        pulled = np.zeros((mesh.count(degree),) + values.shape[1:], dtype=values.dtype)
        pulled[rows] = values[cols]
        result[degree] = pulled
    return DiscreteForm(mesh, result)


class Cycle:
    """Integer (or real) chain of oriented cells, checked to be closed."""

    def __init__(self, mesh, degree, chain, boundary_of=None):
        self.mesh = mesh
        self.degree = degree
        self.chain = np.asarray(chain, dtype=float)
        self.boundary_of = boundary_of
        if self.chain.shape != (mesh.count(degree),):
            raise StructuralError("Chain length does not match the {}-cells".format(degree))
        if degree > 0 and np.abs(self.boundary()).max(initial=0) > 1e-12:
            raise ValidationError("Chain is not closed")

    def boundary(self):
        return self.mesh.d_matrix(self.degree - 1).T @ self.chain

    @classmethod
    def boundary_of_chain(cls, mesh, degree, chain):
        """The closed (degree-1)-cycle ∂c, remembering c."""
        chain = np.asarray(chain, dtype=float)
        return cls(mesh, degree - 1, mesh.d_matrix(degree - 1).T @ chain, boundary_of=chain)

    def integrate(self, form):
        return self.chain @ form.component(self.degree)


def fundamental_chain(mesh, factor=None):
    """Orientation chain of the whole mesh (or of one factor, pulled back over a point)."""
    if factor is not None:
        grid = mesh.factors[factor]
        return _factor_fundamental(grid)
    coefficients = [_factor_fundamental(grid) for grid in mesh.factors]
    chain = np.zeros(mesh.count(mesh.dimension))
    for r, (anchor, dirs) in enumerate(mesh.cells(mesh.dimension)):
        value = 1.0
        for i, grid in enumerate(mesh.factors):
            axes = mesh.factor_axes(i)
            local = (
                tuple(anchor[a] for a in axes),
                tuple(axis - mesh.offsets[i] for axis in dirs if axis in axes),
            )
            value *= coefficients[i].get(local, 0.0)
        chain[r] = value
    return Cycle(mesh, mesh.dimension, chain)


def _factor_fundamental(grid):
    if grid.kind == "circle":
        return {cell: 1.0 for cell in grid.cells(1)}
    signs = {}
    for anchor, dirs in grid.cells(2):
        axis, side = grid.outward_axis(anchor, dirs)
        normal = np.zeros(3)
        normal[axis] = side
        frame = np.array([np.eye(3)[dirs[0]], np.eye(3)[dirs[1]], normal])
        signs[(anchor, dirs)] = float(np.sign(np.linalg.det(frame)))
    return signs


def circle_cycle(mesh, factor, anchor=None):
    """The circle factor traversed once at a fixed point of the other factors."""
    axes = mesh.factor_axes(factor)
    (axis,) = axes
    anchor = tuple(anchor) if anchor is not None else None
    chain = np.zeros(mesh.count(1))
    for r, (a, dirs) in enumerate(mesh.cells(1)):
        if dirs == (axis,):
            rest = tuple(v for i, v in enumerate(a) if i != axis)
            if anchor is None or rest == anchor:
                chain[r] = 1.0
    if anchor is None:
        # single loop through the first anchor of the remaining axes
        first = next(
            tuple(v for i, v in enumerate(a) if i != axis)
            for a, dirs in mesh.cells(1)
            if dirs == (axis,)
        )
        return circle_cycle(mesh, factor, first)
    return Cycle(mesh, 1, chain)


def sphere_cycle(mesh, factor, anchor=None):
    """The sphere factor with its outward orientation at a fixed point of the other factors."""
    grid = mesh.factors[factor]
    signs = _factor_fundamental(grid)
    axes = mesh.factor_axes(factor)
    offset = mesh.offsets[factor]
    chain = np.zeros(mesh.count(2))
    rest_of = lambda a: tuple(v for i, v in enumerate(a) if i not in axes)  # noqa: E731
    if anchor is None:
        anchor = rest_of(mesh.cells(0)[0][0])
    for r, (a, dirs) in enumerate(mesh.cells(2)):
        if all(axis in axes for axis in dirs) and rest_of(a) == tuple(anchor):
            local = (tuple(a[i] for i in axes), tuple(axis - offset for axis in dirs))
            chain[r] = signs[local]
    return Cycle(mesh, 2, chain)


def solid_angle_form(mesh, factor, scale=1.0):
    """Exact area 2-cochain of a sphere factor: signed solid angle / 4π of every square.

    The image of a lattice square is a spherical quadrilateral with great-circle edges, split
    into two spherical triangles whose solid angles follow from the Van Oosterom–Strackee
    formula.
    """
    grid = mesh.factors[factor]
    if grid.kind != "sphere":
        raise StructuralError("Factor {} of {!r} is not a sphere".format(factor, mesh))
    local_mesh = Mesh([grid], mesh.resolution)
    signs = _factor_fundamental(grid)
    values = np.zeros(local_mesh.count(2))
    for r, (anchor, dirs) in enumerate(local_mesh.cells(2)):
        corners = []
        for offsets in ((0, 0), (1, 0), (1, 1), (0, 1)):
            y = np.array(anchor, dtype=float)
            y[dirs[0]] += offsets[0]
            y[dirs[1]] += offsets[1]
            corners.append(grid.embed(y))
        angle = _triangle_solid_angle(corners[0], corners[1], corners[2]) + (
            _triangle_solid_angle(corners[0], corners[2], corners[3])
        )
        values[r] = signs[(anchor, dirs)] * angle / (4 * np.pi)
    return pullback(DiscreteForm(local_mesh, {2: scale * values}), mesh, factor)


def _triangle_solid_angle(a, b, c):
    numerator = abs(np.dot(a, np.cross(b, c)))
    denominator = 1.0 + np.dot(a, b) + np.dot(b, c) + np.dot(c, a)
    return 2.0 * np.arctan2(numerator, denominator)


def circle_length_form(mesh, factor, scale=1.0):
    """The 1-form scale·dt on a circle factor (value scale / M on every edge)."""
    grid = mesh.factors[factor]
    if grid.kind != "circle":
        raise StructuralError("Factor {} of {!r} is not a circle".format(factor, mesh))
    local_mesh = Mesh([grid], mesh.resolution)
    values = np.full(local_mesh.count(1), scale / grid.points)
    return pullback(DiscreteForm(local_mesh, {1: values}), mesh, factor)


def random_trigonometric_form(mesh, degrees, rng, modes=2):
    """Smooth random test form: trigonometric polynomials in the ambient coordinates."""
    components = {}
    for degree in degrees:
        terms = []
        for axes in itertools.combinations(range(mesh.axes), degree):
            frequencies = rng.integers(-modes, modes + 1, size=(modes, mesh.axes))
            amplitudes = rng.normal(size=modes)
            phases = rng.uniform(0, 2 * np.pi, size=modes)

            def coef(x, k=frequencies, c=amplitudes, p=phases):
                return sum(
                    c[m] * np.cos(2 * np.pi * (x @ k[m]) + p[m]) for m in range(len(c))
                )

            terms.append((coef, axes))
        if terms:
            components[degree] = de_rham(AnalyticForm(degree, terms), mesh).component(
                degree
            )
    return DiscreteForm(mesh, components)


def associativity_defect(a, b, c):
    """(a ∧ b) ∧ c - a ∧ (b ∧ c), the only identity the averaged cup breaks."""
    return (a.wedge(b)).wedge(c) - a.wedge(b.wedge(c))
