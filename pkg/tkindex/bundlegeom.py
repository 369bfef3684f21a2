"""Line bundles, circle bundles and the primitive line bundle on product meshes.

The degree-k line bundle over a sphere factor lives on the two-patch cover of the cube
sphere: the north patch is the closure of every square off the bottom face, the south patch
the closure of the bottom face and the lowest band of side squares. The monopole connections

    A_N = (k / 4π) (1 - cos ϑ) dφ,    A_S = -(k / 4π) (1 + cos ϑ) dφ

integrate over a great-circle edge (u, v) to k / 4π times the signed solid angle of the
spherical triangle (pole, u, v), so dA_j = β̄ holds exactly on every square of patch j. The
transition is θ_NS = -k φ / 2π and A_S - A_N = dθ_NS on the overlap.

Forms on the circle bundle and its fiber products are fiber-invariant: they are stored as
polynomials Σ γ_I ∧ a_I in the connection forms γ_1, ..., γ_g of the factors, with base-form
coefficients a_I, and every γ_i satisfies dγ_i = -β̄.
"""
import itertools
import logging
from fractions import Fraction

import numpy as np

from tkindex import cech
from tkindex.forms import (
    AnalyticForm,
    CircleGrid,
    Cycle,
    DiscreteForm,
    Mesh,
    SphereGrid,
    circle_cycle,
    circle_length_form,
    de_rham,
    shuffle_sign,
    solid_angle_form,
    sphere_cycle,
)
from tkindex.utils import (
    StructuralError,
    ValidationError,
    centered,
    convergence_verdict,
    mod_one,
    wrap_angle,
)


logger = logging.getLogger(__name__)

PERIOD_TOLERANCE = 1e-6
PATCH_TOLERANCE = 1e-9

NORTH = "N"
SOUTH = "S"


def find_factor(mesh, kind):
    for i, factor in enumerate(mesh.factors):
        if factor.kind == kind:
            return i
    return None


def catalog_mesh(tag, resolution):
    """Mesh of a catalog base manifold at refinement level r (n = 2**r, M = 8 * 2**r)."""
    tag = cech.ManifoldTag(tag)
    n = 2 ** resolution
    M = 8 * 2 ** resolution
    layouts = {
        cech.ManifoldTag.CIRCLE: lambda: [CircleGrid(M)],
        cech.ManifoldTag.SPHERE2: lambda: [SphereGrid(n)],
        cech.ManifoldTag.TORUS2: lambda: [CircleGrid(M), CircleGrid(M)],
        cech.ManifoldTag.CIRCLE_TIMES_SPHERE2: lambda: [CircleGrid(M), SphereGrid(n)],
        cech.ManifoldTag.TORUS3: lambda: [CircleGrid(M)] * 3,
    }
    if tag not in layouts:
        raise ValidationError("No mesh for base {}".format(tag.value))
    return Mesh(layouts[tag](), resolution)


class Patch:
    """Cells of a mesh that belong to one chart, as boolean masks per degree."""

    def __init__(self, name, masks):
        self.name = name
        self.masks = masks

    def __repr__(self):
        return "<Patch {}>".format(self.name)


def _closure(squares):
    cells = set()
    for anchor, dirs in squares:
        for size in range(3):
            for kept in itertools.combinations(dirs, size):
                moved_axes = [a for a in dirs if a not in kept]
                for shift in itertools.product((0, 1), repeat=len(moved_axes)):
                    moved = list(anchor)
                    for axis, s in zip(moved_axes, shift):
                        moved[axis] += s
                    cells.add((tuple(moved), kept))
    return cells


def _patch_masks(mesh, factor, closure):
    axes = mesh.factor_axes(factor)
    offset = mesh.offsets[factor]
    masks = {}
    for degree in range(mesh.dimension + 1):
        mask = np.zeros(mesh.count(degree), dtype=bool)
        for r, (anchor, dirs) in enumerate(mesh.cells(degree)):
            local = (
                tuple(anchor[a] for a in axes),
                tuple(axis - offset for axis in dirs if axis in axes),
            )
            mask[r] = local in closure
        masks[degree] = mask
    return masks


def sphere_patches(mesh, factor):
    """North and south patches of a sphere factor, pulled back over the other factors."""
    squares = mesh.factors[factor].cells(2)
    bottom = [(a, d) for a, d in squares if d == (0, 1) and a[2] == 0]
    band = [(a, d) for a, d in squares if 2 in d and a[2] == 0]
    north = [(a, d) for a, d in squares if not (d == (0, 1) and a[2] == 0)]
    return [
        Patch(NORTH, _patch_masks(mesh, factor, _closure(north))),
        Patch(SOUTH, _patch_masks(mesh, factor, _closure(bottom + band))),
    ]


def signed_solid_angle(a, b, c):
    """Oriented solid angle of the spherical triangle (a, b, c); rows broadcast."""
    numerator = np.einsum("...i,...i->...", a, np.cross(b, c))
    denominator = (
        1.0
        + np.einsum("...i,...i->...", a, b)
        + np.einsum("...i,...i->...", b, c)
        + np.einsum("...i,...i->...", c, a)
    )
    return 2.0 * np.arctan2(numerator, denominator)


def edge_ends(mesh):
    """Vertex indices of the tail and the head of every edge."""
    d0 = mesh.d_matrix(0).tocoo()
    heads = np.zeros(mesh.count(1), dtype=int)
    tails = np.zeros(mesh.count(1), dtype=int)
    heads[d0.row[d0.data > 0]] = d0.col[d0.data > 0]
    tails[d0.row[d0.data < 0]] = d0.col[d0.data < 0]
    return tails, heads


def _sphere_edge_vectors(mesh, factor):
    o = mesh.offsets[factor]
    positions = mesh.vertex_positions()[:, o : o + 3]
    tails, heads = edge_ends(mesh)
    axes = mesh.factor_axes(factor)
    on_sphere = np.array(
        [len(dirs) == 1 and dirs[0] in axes for _anchor, dirs in mesh.cells(1)]
    )
    return positions[tails], positions[heads], on_sphere


def monopole_connection(mesh, factor, degree, hemisphere, mask):
    """Exact edge integrals of the monopole potential of one hemisphere chart."""
    tails, heads, on_sphere = _sphere_edge_vectors(mesh, factor)
    pole = np.array([0.0, 0.0, 1.0 if hemisphere == NORTH else -1.0])
    angles = signed_solid_angle(np.broadcast_to(pole, tails.shape), tails, heads)
    values = np.where(mask & on_sphere, degree * angles / (4 * np.pi), 0.0)
    return DiscreteForm.homogeneous(mesh, 1, values)


def monopole_curvature(mesh, factor, degree):
    """Analytic (k / 4π) x area form of a sphere factor."""
    o = mesh.offsets[factor]
    scale = degree / (4 * np.pi)
    return AnalyticForm(
        2,
        [
            (lambda x: scale * x[..., o], (o + 1, o + 2)),
            (lambda x: -scale * x[..., o + 1], (o, o + 2)),
            (lambda x: scale * x[..., o + 2], (o, o + 1)),
        ],
    )


class HermitianLineBundle:
    """Discrete Hermitian line bundle with connection.

    Attributes:
        base (Mesh)
        degree (int): Chern number over the sphere factor
        cover (Nerve): nerve of the patch cover (one or two patches)
        patches (list): Patch instances, preferred patch first
        local_connection (dict): patch name -> DiscreteForm of degree 1 (zero off the patch)
        transition (np.ndarray): real lift of θ_NS on overlap vertices (nan elsewhere)
        curvature (DiscreteForm): the global 2-form β̄
    """

    def __init__(self, base, degree=0):
        self.base = base
        self.degree = int(degree)
        self.sphere_factor = find_factor(base, "sphere")
        if self.sphere_factor is None:
            if self.degree:
                raise ValidationError(
                    "A non-trivial line bundle needs a sphere factor in {!r}".format(base)
                )
            everything = {
                k: np.ones(base.count(k), dtype=bool) for k in range(base.dimension + 1)
            }
            self.patches = [Patch(NORTH, everything)]
            self.cover = cech.point_nerve()
            self.local_connection = {
                NORTH: DiscreteForm.homogeneous(base, 1, np.zeros(base.count(1)))
            }
            self.transition = np.full(base.count(0), np.nan)
            self.curvature = DiscreteForm.homogeneous(base, 2, np.zeros(base.count(2)))
            return

        self.patches = sphere_patches(base, self.sphere_factor)
        self.cover = cech.Nerve(2, {1: [(0, 1)]})
        self.local_connection = {
            patch.name: monopole_connection(
                base, self.sphere_factor, self.degree, patch.name, patch.masks[1]
            )
            for patch in self.patches
        }
        overlap = self.patches[0].masks[0] & self.patches[1].masks[0]
        self.transition = np.where(
            overlap, -self.degree * self._azimuths() / (2 * np.pi), np.nan
        )
        self.curvature = solid_angle_form(base, self.sphere_factor, scale=self.degree)
        self.validate()

    def _azimuths(self):
        o = self.base.offsets[self.sphere_factor]
        positions = self.base.vertex_positions()
        return np.arctan2(positions[:, o + 1], positions[:, o])

    def patch(self, name):
        for patch in self.patches:
            if patch.name == name:
                return patch
        raise StructuralError("No patch named {!r}".format(name))

    def curvature_residual(self):
        """max over patches of |dA_j - β̄| on the 2-cells of patch j."""
        residual = 0.0
        for patch in self.patches:
            dA = self.local_connection[patch.name].d().component(2)
            difference = (dA - self.curvature.component(2))[patch.masks[2]]
            if difference.size:
                residual = max(residual, float(np.abs(difference).max()))
        return residual

    def transition_residual(self):
        """max |A_S - A_N - dθ_NS| over overlap edges."""
        if len(self.patches) < 2:
            return 0.0
        north, south = self.patches
        overlap = north.masks[1] & south.masks[1]
        if not overlap.any():
            return 0.0
        turn = wrap_angle(self.base.d_matrix(0) @ self._azimuths())
        d_theta = -self.degree * turn / (2 * np.pi)
        difference = (
            self.local_connection[SOUTH].component(1)
            - self.local_connection[NORTH].component(1)
            - d_theta
        )
        return float(np.abs(difference[overlap]).max())

    def chern_number(self):
        if self.sphere_factor is None:
            return 0.0
        return float(sphere_cycle(self.base, self.sphere_factor).integrate(self.curvature))

    def validate(self):
        period = self.chern_number()
        if abs(period - round(period)) > PERIOD_TOLERANCE:
            raise ValidationError("Curvature period {} is not an integer".format(period))
        for name, residual in (
            ("dA_j - β̄", self.curvature_residual()),
            ("A_S - A_N - dθ_NS", self.transition_residual()),
        ):
            if residual > PATCH_TOLERANCE:
                raise ValidationError(
                    "Connection data inconsistent: |{}| = {:.3e}".format(name, residual)
                )
        logger.debug("Line bundle of degree %s on %r validated", self.degree, self.base)

    def refined(self):
        return HermitianLineBundle(self.base.refined(), self.degree)

    def __repr__(self):
        return "<HermitianLineBundle degree={} on {!r}>".format(self.degree, self.base)


def holonomy(L, z):
    """Holonomy of L around a closed 1-chain, as a circle value in [0, 1).

    Each edge is evaluated with the connection of the first patch containing it. The part of
    the chain evaluated in the south chart is converted back with -<θ_NS, ∂z_S>.
    """
    if not isinstance(z, Cycle):
        z = Cycle(L.base, 1, z)
    if z.degree != 1:
        raise ValidationError("Holonomy is evaluated on 1-cycles")
    chain = z.chain
    total = 0.0
    assigned = np.zeros(L.base.count(1), dtype=bool)
    for number, patch in enumerate(L.patches):
        own = patch.masks[1] & ~assigned
        assigned |= own
        partial = np.where(own, chain, 0.0)
        total += float(partial @ L.local_connection[patch.name].component(1))
        if number == 0:
            continue
        boundary = L.base.d_matrix(0).T @ partial
        support = np.abs(boundary) > 1e-12
        if support.any():
            lifts = L.transition[support]
            if np.isnan(lifts).any():
                raise ValidationError("Chart switch outside the patch overlap")
            total -= float(boundary[support] @ lifts)
    if not assigned[np.abs(chain) > 0].all():
        raise ValidationError("Chain leaves the patch cover")
    return float(mod_one(total))


def equator_cycle(mesh, factor):
    """Lattice equator of a sphere factor, counterclockwise seen from +z (n even)."""
    grid = mesh.factors[factor]
    if grid.n % 2:
        raise ValidationError("The lattice equator needs an even sphere lattice")
    axes = mesh.factor_axes(factor)
    o = mesh.offsets[factor]
    rest_of = lambda a: tuple(v for i, v in enumerate(a) if i not in axes)  # noqa: E731
    base_point = rest_of(mesh.cells(0)[0][0])
    tails, heads, _on_sphere = _sphere_edge_vectors(mesh, factor)
    chain = np.zeros(mesh.count(1))
    for r, (anchor, dirs) in enumerate(mesh.cells(1)):
        if dirs not in ((o,), (o + 1,)) or anchor[o + 2] != grid.n // 2:
            continue
        if rest_of(anchor) != base_point:
            continue
        turn = wrap_angle(
            np.arctan2(heads[r][1], heads[r][0]) - np.arctan2(tails[r][1], tails[r][0])
        )
        chain[r] = 1.0 if turn > 0 else -1.0
    return Cycle(mesh, 1, chain)


def upper_cap_chain(mesh, factor):
    """2-chain of the squares above the lattice equator, outward orientation."""
    grid = mesh.factors[factor]
    full = sphere_cycle(mesh, factor).chain
    o = mesh.offsets[factor]
    chain = np.zeros_like(full)
    for r, (anchor, _dirs) in enumerate(mesh.cells(2)):
        if full[r] and anchor[o + 2] >= grid.n // 2:
            chain[r] = full[r]
    return chain


def stokes_defect(L, cap):
    """|holonomy(∂c) - ∫_c β̄| as a centered circle value."""
    boundary = Cycle.boundary_of_chain(L.base, 2, cap)
    flux = float(cap @ L.curvature.component(2))
    return abs(float(centered(holonomy(L, boundary) - flux)))


def stokes_study(degree, resolutions, base=cech.ManifoldTag.SPHERE2):
    """Refinement study of the Stokes defect over the upper cap."""
    steps, residuals = [], []
    for r in resolutions:
        L = HermitianLineBundle(catalog_mesh(base, r), degree)
        residuals.append(stokes_defect(L, upper_cap_chain(L.base, L.sphere_factor)))
        steps.append(L.base.spacing)
    return convergence_verdict(steps, residuals, min_slope=1.5, floor=1e-10)


def _accumulate(result, key, term):
    result[key] = result[key] + term if key in result else term


class InvariantForm:
    """Fiber-invariant form Σ_I γ_I ∧ a_I on a g-fold fiber product of a circle bundle.

    Attributes:
        mesh (Mesh): the base mesh
        generators (int): g
        components (dict): sorted generator tuple I -> base DiscreteForm a_I
        curvature (DiscreteForm): β̄, with dγ_i = -β̄
    """

    def __init__(self, mesh, generators, components, curvature):
        self.mesh = mesh
        self.generators = generators
        self.curvature = curvature
        self.components = {}
        for key, form in components.items():
            key = tuple(key)
            if list(key) != sorted(set(key)) or any(i < 1 or i > generators for i in key):
                raise StructuralError("Bad generator index", key=key)
            self.components[key] = form

    @classmethod
    def from_base(cls, form, generators, curvature):
        return cls(form.mesh, generators, {(): form}, curvature)

    @classmethod
    def gamma(cls, mesh, generators, i, curvature):
        return cls(mesh, generators, {(i,): DiscreteForm.constant(mesh)}, curvature)

    def _like(self, components):
        return InvariantForm(self.mesh, self.generators, components, self.curvature)

    def component(self, key):
        return self.components.get(tuple(key), DiscreteForm.zero(self.mesh))

    def d(self):
        result = {}
        for key, form in self.components.items():
            for pos in range(len(key)):
                rest = key[:pos] + key[pos + 1 :]
                _accumulate(result, rest, -((-1) ** pos) * self.curvature.wedge(form))
            _accumulate(result, key, (-1) ** len(key) * form.d())
        return self._like(result)

    def wedge(self, other):
        if other.generators != self.generators:
            raise StructuralError("Forms on different fiber products")
        result = {}
        for I, a in self.components.items():
            for J, b in other.components.items():
                if set(I) & set(J):
                    continue
                merged = tuple(sorted(I + J))
                sign = shuffle_sign(I, J)
                for p in a.degrees:
                    term = sign * (-1) ** (p * len(J)) * a.restrict([p]).wedge(b)
                    _accumulate(result, merged, term)
        return self._like(result)

    def contract(self, i):
        """Interior product with the fiber vector field of generator i."""
        result = {}
        for key, form in self.components.items():
            if i in key:
                pos = key.index(i)
                _accumulate(result, key[:pos] + key[pos + 1 :], (-1) ** pos * form)
        return self._like(result)

    # fibers have length one: integration along fiber i is the contraction
    fiber_integral = contract

    def lie(self, i):
        return self.contract(i).d() + self.d().contract(i)

    def relabel(self, mapping, generators):
        """Pullback along the projection sending generator i to mapping[i]."""
        result = {}
        for key, form in self.components.items():
            image = tuple(mapping[i] for i in key)
            if len(set(image)) < len(image):
                continue
            sign = 1
            for a, b in itertools.combinations(image, 2):
                if a > b:
                    sign = -sign
            _accumulate(result, tuple(sorted(image)), sign * form)
        return InvariantForm(self.mesh, generators, result, self.curvature)

    def __add__(self, other):
        result = dict(self.components)
        for key, form in other.components.items():
            _accumulate(result, key, form)
        return self._like(result)

    def __neg__(self):
        return self._like({k: -v for k, v in self.components.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        return self._like({k: scalar * v for k, v in self.components.items()})

    __rmul__ = __mul__

    def norm(self):
        return max((form.norm() for form in self.components.values()), default=0.0)

    def scaled_norm(self):
        return max((form.scaled_norm() for form in self.components.values()), default=0.0)

    def __repr__(self):
        return "<InvariantForm g={} keys={}>".format(self.generators, sorted(self.components))


class CircleBundleTotal:
    """Circle bundle of a line bundle, with fiber grid and connection form γ = dθ - A_j.

    Fiber coordinates are exact rationals in each chart; θ_N = θ_S - θ_NS on the overlap.
    """

    def __init__(self, base_bundle, fiber_points):
        if fiber_points < 8:
            raise ValidationError(
                "A fiber needs at least 8 points, got {}".format(fiber_points)
            )
        period = base_bundle.chern_number()
        if abs(period - round(period)) > PERIOD_TOLERANCE:
            raise ValidationError("Curvature period {} is not an integer".format(period))
        self.base_bundle = base_bundle
        self.fiber = CircleGrid(fiber_points)
        self.fiber_points = int(fiber_points)
        self.connection_form = self.gamma(1, 1)

    @property
    def mesh(self):
        return self.base_bundle.base

    @property
    def curvature(self):
        return self.base_bundle.curvature

    def gamma(self, i, generators):
        return InvariantForm.gamma(self.mesh, generators, i, self.curvature)

    def base_form(self, form, generators=1):
        return InvariantForm.from_base(form, generators, self.curvature)

    def fiber_coordinate(self, index):
        return Fraction(index % self.fiber_points, self.fiber_points)

    def charts_at(self, vertex):
        return [p.name for p in self.base_bundle.patches if p.masks[0][vertex]]

    def change_chart(self, vertex, theta, source, target):
        """Fiber coordinate of a point of chart `source` expressed in chart `target`."""
        if source == target:
            return theta
        lift = self.base_bundle.transition[vertex]
        if np.isnan(lift):
            raise ValidationError("Vertex is not in the patch overlap", sample=vertex)
        shift = Fraction(float(lift))
        return theta - shift if target == NORTH else theta + shift

    def chern_number(self):
        """Minus the flux of dγ through the sphere factor."""
        factor = self.base_bundle.sphere_factor
        if factor is None:
            return 0.0
        dgamma = self.connection_form.d().component(())
        return -float(sphere_cycle(self.mesh, factor).integrate(dgamma))

    def __repr__(self):
        return "<CircleBundleTotal M_f={} over {!r}>".format(
            self.fiber_points, self.base_bundle
        )


def build_circle_bundle(L, fiber_points):
    return CircleBundleTotal(L, fiber_points)


class ShiftCharacter:
    """s(z1, z2) = θ1 - θ2 mod 1 for two points (vertex, chart, θ) of one fiber."""

    def __init__(self, total):
        self.total = total

    def __call__(self, z1, z2):
        vertex1, chart1, theta1 = z1
        vertex2, chart2, theta2 = z2
        if vertex1 != vertex2:
            raise ValidationError("Points lie in different fibers", sample=(vertex1, vertex2))
        return mod_one(theta1 - self.total.change_chart(vertex2, theta2, chart2, chart1))

    def dlog(self, generators=2, first=1, second=2):
        """dlog s as the invariant form π_1*γ - π_2*γ."""
        return self.total.gamma(first, generators) - self.total.gamma(second, generators)

    def dlog_residual(self, seed=0, samples=64):
        """max |Δs - ∫(γ_1 - γ_2)| over random edges of the fiber product.

        An edge moves the base point along a mesh edge inside one chart and each fiber
        coordinate by at most one fiber step; γ_1 - γ_2 integrates to the difference of the
        fiber steps since the connection terms of both points cancel.
        """
        rng = np.random.default_rng(seed)
        total = self.total
        tails, heads = edge_ends(total.mesh)
        step = Fraction(1, total.fiber_points)
        residual = Fraction(0)
        for _ in range(samples):
            edge = int(rng.integers(total.mesh.count(1)))
            tail, head = int(tails[edge]), int(heads[edge])
            charts = [c for c in total.charts_at(tail) if c in total.charts_at(head)]
            chart = charts[int(rng.integers(len(charts)))]
            theta1 = total.fiber_coordinate(int(rng.integers(total.fiber_points)))
            theta2 = total.fiber_coordinate(int(rng.integers(total.fiber_points)))
            k1, k2 = (int(k) for k in rng.integers(-1, 2, size=2))
            before = self((tail, chart, theta1), (tail, chart, theta2))
            after = self((head, chart, theta1 + k1 * step), (head, chart, theta2 + k2 * step))
            residual = max(residual, abs(centered(after - before - (k1 - k2) * step)))
        return residual


def shift_character(t):
    return ShiftCharacter(t)


class MeshCircleMap:
    """Circle-valued map u of winding w along a circle factor of the base mesh.

    The lift f(x) = w x / M jumps by -w across the cut edge (M - 1 -> 0), so df = ᾱ - w χ
    with χ the indicator cochain of the cut edges.
    """

    def __init__(self, mesh, winding, factor=None):
        self.mesh = mesh
        self.winding = int(winding)
        self.factor = factor if factor is not None else find_factor(mesh, "circle")
        if self.factor is None:
            if self.winding:
                raise ValidationError("A winding map needs a circle factor")
            self.lift = DiscreteForm.constant(mesh, 0.0)
            self.cut = DiscreteForm.homogeneous(mesh, 1, np.zeros(mesh.count(1)))
            self.alpha_bar = DiscreteForm.homogeneous(mesh, 1, np.zeros(mesh.count(1)))
            return
        points = mesh.factors[self.factor].points
        axis = mesh.offsets[self.factor]
        lift = np.array([self.winding * anchor[axis] / points for anchor, _d in mesh.cells(0)])
        cut = np.array(
            [
                1.0 if dirs == (axis,) and anchor[axis] == points - 1 else 0.0
                for anchor, dirs in mesh.cells(1)
            ]
        )
        self.lift = DiscreteForm.homogeneous(mesh, 0, lift)
        self.cut = DiscreteForm.homogeneous(mesh, 1, cut)
        self.alpha_bar = circle_length_form(mesh, self.factor, scale=self.winding)
        self.validate()

    @classmethod
    def from_cech(cls, mesh, u):
        """Mesh realization of a Čech circle-valued map on the three-patch circle nerve.

        The winding is the pairing of the transitions with the cycle [01] + [12] - [02].
        """
        if u.nerve.manifold_tag is not cech.ManifoldTag.CIRCLE:
            raise ValidationError("Only circle-valued maps on the circle nerve are realized")
        n = u.transitions.values
        return cls(mesh, int(n[(0, 1)] + n[(1, 2)] - n[(0, 2)]))

    def validate(self):
        residual = (self.lift.d() - self.alpha_bar + self.winding * self.cut).norm()
        if residual > PATCH_TOLERANCE:
            raise ValidationError(
                "Lift jumps do not match the winding: residual {:.3e}".format(residual)
            )

    def rebranched(self, shift):
        """Same map with the lift moved by the deck shift f -> f + shift."""
        other = MeshCircleMap(self.mesh, self.winding, self.factor)
        other.lift = self.lift + DiscreteForm.constant(self.mesh, float(shift))
        return other

    def winding_number(self):
        if self.factor is None:
            return 0.0
        return float(circle_cycle(self.mesh, self.factor).integrate(self.alpha_bar))


class PrimitiveBundle:
    """Primitive line bundle J on the fiber product of a circle bundle.

    Attributes:
        total (CircleBundleTotal)
        u (MeshCircleMap)
        shift (ShiftCharacter)
        connection_1form (InvariantForm): f dlog s on the 2-fold fiber product
        curvature_mu (InvariantForm): μ = ᾱ ∧ γ on the circle bundle
    """

    def __init__(self, total, u):
        self.total = total
        self.u = u
        self.shift = ShiftCharacter(total)
        self.connection_1form = total.base_form(u.lift, 2).wedge(self.shift.dlog())
        self.curvature_mu = total.base_form(u.alpha_bar, 1).wedge(total.gamma(1, 1))

    def curvature(self):
        """F_J = d(f ds) + w χ ∧ ds; the second term removes the jump of f across the cut."""
        ds = self.shift.dlog()
        correction = self.total.base_form(self.u.winding * self.u.cut, 2).wedge(ds)
        return self.connection_1form.d() + correction

    def transition(self, z1, z2):
        """Deck-shift transition of J, the additive character w s(z1, z2) mod 1."""
        return mod_one(self.u.winding * self.shift(z1, z2))

    def rebranched(self, shift):
        """J built from the lift f + shift; the connection changes by shift · dlog s."""
        return PrimitiveBundle(self.total, self.u.rebranched(shift))

    def __repr__(self):
        return "<PrimitiveBundle w={} over {!r}>".format(self.u.winding, self.total)


def build_primitive_bundle(u, t):
    if not u.mesh.same_as(t.mesh):
        raise ValidationError("The circle-valued map lives on a different base mesh")
    u.validate()
    return PrimitiveBundle(t, u)


def _sample_points(J, rng, count, arity):
    total = J.total
    samples = []
    for _ in range(count):
        vertex = int(rng.integers(total.mesh.count(0)))
        charts = total.charts_at(vertex)
        samples.append(
            [
                (
                    vertex,
                    charts[int(rng.integers(len(charts)))],
                    total.fiber_coordinate(int(rng.integers(total.fiber_points))),
                )
                for _j in range(arity)
            ]
        )
    return samples


def check_primitivity(J, seed=0, samples=64):
    """Defects of π_S*J ⊗ π_F*J -> π_C*J on Y^[3] and of its associativity on Y^[4]."""
    rng = np.random.default_rng(seed)
    s = J.transition
    transition_defect = Fraction(0)
    for z1, z2, z3 in _sample_points(J, rng, samples, 3):
        transition_defect = max(
            transition_defect, abs(centered(s(z1, z2) + s(z2, z3) - s(z1, z3)))
        )
    associativity_defect = Fraction(0)
    for z1, z2, z3, z4 in _sample_points(J, rng, samples, 4):
        left = (s(z1, z2) + s(z2, z3)) + s(z3, z4)
        right = s(z1, z2) + (s(z2, z3) + s(z3, z4))
        defect = max(abs(centered(left - right)), abs(centered(left - s(z1, z4))))
        associativity_defect = max(associativity_defect, defect)

    omega = J.connection_1form
    on_triples = (
        omega.relabel({1: 1, 2: 2}, 3)
        + omega.relabel({1: 2, 2: 3}, 3)
        - omega.relabel({1: 1, 2: 3}, 3)
    )
    report = {
        "transition_defect": transition_defect,
        "connection_defect": on_triples.norm(),
        "associativity_defect": associativity_defect,
        "samples": samples,
    }
    logger.debug("Primitivity of %r: %s", J, report)
    return report


def analytic_twist(mesh, winding, degree):
    """Analytic 3-form w dt ∧ (k / 4π) area on a circle x sphere mesh."""
    t_axis = mesh.offsets[find_factor(mesh, "circle")]
    terms = []
    for coef, axes in monopole_curvature(mesh, find_factor(mesh, "sphere"), degree).terms:
        sign = shuffle_sign((t_axis,), axes)
        terms.append(
            (
                lambda x, c=coef, s=sign: (s * winding) * c(x),
                tuple(sorted((t_axis,) + axes)),
            )
        )
    return AnalyticForm(3, terms)


def curvature_report(J, order=8):
    """μ together with the residuals of F_J = π_1*μ - π_2*μ and dμ = ᾱ ∧ β.

    Returns:
        dict with "mu" (InvariantForm) and "checks" (named residuals and periods).
    """
    mesh = J.total.mesh
    mu = J.curvature_mu
    F = J.curvature()
    split = F - (mu.relabel({1: 1}, 2) - mu.relabel({1: 2}, 2))
    checks = {"curvature_split": split.scaled_norm()}

    dmu = mu.d()
    circle = find_factor(mesh, "circle")
    if circle is not None and find_factor(mesh, "sphere") is not None:
        exact = de_rham(
            analytic_twist(mesh, J.u.winding, J.total.base_bundle.degree), mesh, order=order
        )
        checks["dmu_twist"] = (dmu - J.total.base_form(exact, 1)).scaled_norm()
    else:
        twist = J.u.alpha_bar.wedge(J.total.curvature)
        checks["dmu_twist"] = (dmu - J.total.base_form(twist, 1)).scaled_norm()
    if circle is not None:
        # fiber of the first point times the base circle
        period = float(circle_cycle(mesh, circle).integrate(F.fiber_integral(1).component(())))
        checks["fiber_product_period"] = abs(period)
        checks["fiber_product_period_defect"] = abs(period - round(period))
    logger.info("Curvature report on %r: %s", mesh, checks)
    return {"mu": mu, "checks": checks}


def curvature_study(bundles, min_slope=1.5, floor=1e-10):
    """Refinement study of the curvature residuals of primitive bundles on successive meshes.

    Returns:
        dict with "steps", "checks" (the curvature_report checks of every bundle) and
        "verdicts" (a convergence verdict per residual column).
    """
    steps, checks = [], []
    for J in bundles:
        checks.append(curvature_report(J)["checks"])
        steps.append(J.u.mesh.spacing)
    verdicts = {
        name: convergence_verdict(
            steps, [c[name] for c in checks], min_slope=min_slope, floor=floor
        )
        for name in ("curvature_split", "dmu_twist")
    }
    return {"steps": steps, "checks": checks, "verdicts": verdicts}
