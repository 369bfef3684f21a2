"""Chern–Weil calculator for fiber-operator families.

Odd characters of invertible families come from the t-integral of
tr(θ exp((1-t)Ω + t A⁻¹ΩA + t(1-t)θ²)) with θ = A⁻¹∇A evaluated by matrix logarithms along
mesh edges; even characters of idempotent families are evaluated with lattice plaquettes, so
their periods are exact integers. The relative character of a symbol integrates the odd form
of its multilinear interpolation over the cells of S¹ x X, and the topological side is the
integral of that form over the fiber circle. Riesz projections of the linearized symbol give
a second evaluation of the same class.

Normalizations: the degree 2k+1 part of the odd integrand is multiplied by
(-1)^k (2πi)^-(k+1), which makes the winding loop pair to 1; even degree 2 parts are the
plaquette Berry phases divided by -2π. Twists and the subcomplex map carry no 2πi factor.
"""
import itertools
import logging
from fractions import Fraction

import numpy as np
import sympy
from scipy.linalg import logm

from tkindex import twistedderham
from tkindex.bundlegeom import NORTH, edge_ends
from tkindex.fiberops import (
    OperatorFamily,
    analytic_index,
    mode_shift,
    twisted_conjugate,
)
from tkindex.forms import CircleGrid, DiscreteForm, Mesh, circle_cycle
from tkindex.utils import ComputationError, StructuralError, ValidationError, gauss_legendre


logger = logging.getLogger(__name__)

T_NODES = 12
MIN_T_NODES = 8
INVERTIBILITY_LIMIT = 1e-10
IDEMPOTENCY_TOLERANCE = 1e-10
INTEGER_TOLERANCE = 1e-8
CONTOUR_NODES = 64
SYMBOL_QUADRATURE_ORDER = 16
SYMBOL_CELL_BATCH = 32
# factors of tr(ω) and tr(ω_1 [ω_2, ω_3]) in the degree-1 and degree-3 parts of the odd form
ODD_DENSITY = {1: 1 / (2j * np.pi), 3: 1 / (8 * np.pi ** 2)}
# real dimension of the fiber of T*(Y/X) for circle fibers; the sign (-1)^n it produces is
# the one under which the Bott family agrees on both sides
VERTICAL_COTANGENT_DIMENSION = 2
NORMALIZATIONS = {
    "odd": "degree 2k+1 scaled by (-1)^k (2 pi i)^-(k+1)",
    "even": "degree 2 = -arg(plaquette holonomy) / 2 pi",
    "topological_sign": "(-1)^n with n = dim T*(Y/X) fiber = 2",
    "pushforward": "degree 2k+1 times (-1)^k, then integrated over the fiber circle",
    "twist": "delta_bar = alpha_bar ^ beta_bar, no 2 pi i factor",
}


class ConnectionData:
    """Background connection of a fiber-operator family.

    Attributes:
        mesh (Mesh): base mesh
        base_connection (dict or None): patch name -> local 1-form of the line bundle
        J_connection (InvariantForm or None): f dlog s on the fiber product
        curvature_Omega (np.ndarray or None): (2-cells, r, r) stack
            2πi (β̄ ⊗ D - (f ∧ β̄) ⊗ 1), D the mode operator; both summands are mode-diagonal
        phases (np.ndarray or None): per-edge connection value a_e, transported kernels are
            conjugated by diag(e^{2πi a_e k})
        deck (np.ndarray): per-edge mode shift across the cut of u
        twist (TwistData or None), total (CircleBundleTotal or None), alpha_bar: data of the
            subcomplex map and of the twisted closedness check
    """

    def __init__(
        self,
        mesh,
        base_connection=None,
        J_connection=None,
        curvature_Omega=None,
        phases=None,
        deck=None,
        modes=None,
        twist=None,
        total=None,
        alpha_bar=None,
    ):
        self.mesh = mesh
        self.base_connection = base_connection
        self.J_connection = J_connection
        self.curvature_Omega = curvature_Omega
        self.phases = phases
        self.deck = deck if deck is not None else np.zeros(mesh.count(1), dtype=int)
        self.modes = modes
        self.twist = twist
        self.total = total
        self.alpha_bar = alpha_bar

    @classmethod
    def trivial(cls, mesh):
        return cls(mesh)

    @classmethod
    def for_primitive_bundle(cls, J, N):
        """Connection of the twisted family on the base of J, for the mode band -N..N."""
        total = J.total
        mesh = total.mesh
        L = total.base_bundle
        modes = np.arange(-N, N + 1)
        beta = L.curvature.component(2)
        f_beta = J.u.lift.wedge(L.curvature).component(2)
        Omega = 2j * np.pi * (
            beta[:, None, None] * np.diag(modes)[None, :, :]
            - f_beta[:, None, None] * np.eye(len(modes))[None, :, :]
        )
        north = L.patches[0]
        phases = np.where(
            north.masks[1],
            L.local_connection[NORTH].component(1),
            L.local_connection[L.patches[-1].name].component(1),
        )
        deck = np.rint(J.u.cut.component(1)).astype(int) * J.u.winding
        return cls(
            mesh,
            base_connection=L.local_connection,
            J_connection=J.connection_1form,
            curvature_Omega=Omega,
            phases=phases,
            deck=deck,
            modes=modes,
            twist=twistedderham.TwistData.decomposable(J.u.alpha_bar, L.curvature),
            total=total,
            alpha_bar=J.u.alpha_bar,
        )

    def transported(self, edge, kernel):
        """Matrix of the head kernel of an edge, moved into the frame of the tail.

        Across the cut the kernel is conjugated by the deck shift; modes the shift vacates at the
        band edge are filled with the identity, where Id + a is the identity up to the decay of a.
        """
        n = int(self.deck[edge])
        matrix = kernel.matrix
        if n:
            shift = mode_shift(kernel.N, n, kernel.rank)
            matrix = twisted_conjugate(kernel, n).matrix + np.eye(len(shift)) - shift @ shift.T
        if self.phases is not None and self.modes is not None:
            u = np.repeat(np.exp(2j * np.pi * self.phases[edge] * self.modes), kernel.rank)
            if len(u) == matrix.shape[0] == matrix.shape[1]:
                matrix = u[:, None] * matrix * np.conj(u)[None, :]
        return matrix


class ChernForm:
    """A Chern character form with its audit residuals.

    Attributes:
        form (DiscreteForm or None): None over a point base
        parity (str): "even" or "odd"
        degree0 (float or None): constant degree-0 value of even forms
        closedness_residual (float): ‖(d + δ̄∧) form‖ (plain d without a twist)
        subcomplex_residual (float): residual of the subcomplex conditions of its image on L̃
        factorization_residual (float): ‖basic part of the image - form‖
    """

    def __init__(
        self,
        form,
        parity,
        degree0=None,
        closedness_residual=0.0,
        subcomplex_residual=0.0,
        factorization_residual=0.0,
        min_singular_value=None,
    ):
        self.form = form
        self.parity = parity
        self.degree0 = degree0
        self.closedness_residual = closedness_residual
        self.subcomplex_residual = subcomplex_residual
        self.factorization_residual = factorization_residual
        self.min_singular_value = min_singular_value
        self.normalizations = NORMALIZATIONS

    def pairing(self, cycle):
        if self.form is None:
            raise StructuralError("A character over a point has no cycles to pair with")
        return float(np.real(cycle.integrate(self.form)))

    def residuals(self):
        return {
            "closedness": self.closedness_residual,
            "subcomplex": self.subcomplex_residual,
            "factorization": self.factorization_residual,
        }

    def __sub__(self, other):
        if self.parity != other.parity:
            raise StructuralError("Cannot subtract characters of different parity")
        form = None if self.form is None else self.form - other.form
        degree0 = None if self.degree0 is None else self.degree0 - other.degree0
        return ChernForm(form, self.parity, degree0=degree0)

    def __repr__(self):
        return "<ChernForm {} degrees={}>".format(
            self.parity, None if self.form is None else self.form.degrees
        )


def _audit(form, conn):
    """Closedness, subcomplex and factorization residuals of a character."""
    if conn is not None and conn.twist is not None:
        closedness = twistedderham.twisted_d(form, conn.twist).norm()
    else:
        closedness = form.d().norm()
    subcomplex = factorization = 0.0
    if conn is not None and conn.total is not None:
        image = twistedderham.subcomplex_map(form, conn.total, conn.alpha_bar)
        subcomplex = max(
            twistedderham.subcomplex_conditions(form, conn.total, conn.alpha_bar).values()
        )
        factorization = (image.component(()) - form).norm()
    return closedness, subcomplex, factorization


def _exp_truncated(X, identity, max_degree):
    """1 + X + X∧X/2 + ... for a matrix 2-form, dropping form degrees above max_degree."""
    result = identity
    power = identity
    k = 0
    while 2 * (k + 1) <= max_degree:
        k += 1
        power = power.wedge(X) * (1.0 / k)
        result = result + power
    return result


def _minimum_singular_values(A):
    return np.array(
        [np.linalg.svd(kernel.matrix, compute_uv=False).min() for kernel in A.kernels]
    )


def odd_chern(A, conn=None, t_nodes=T_NODES):
    """Odd Chern character of an invertible family over its base mesh."""
    if t_nodes < MIN_T_NODES:
        raise ValidationError("The t-integral needs at least {} nodes".format(MIN_T_NODES))
    mesh = A.mesh
    if mesh is None:
        raise StructuralError("Odd characters need a base mesh")
    conn = conn if conn is not None else ConnectionData.trivial(mesh)
    smallest = _minimum_singular_values(A)
    worst = int(np.argmin(smallest))
    if smallest[worst] < INVERTIBILITY_LIMIT:
        raise ComputationError(
            "Family is not invertible: smallest singular value {:.3e}".format(smallest[worst]),
            sample=worst,
        )
    size = A.kernels[0].matrix.shape[0]
    tails, heads = edge_ends(mesh)
    theta = np.zeros((mesh.count(1), size, size), dtype=complex)
    for e, (t, h) in enumerate(zip(tails, heads)):
        head = conn.transported(e, A.kernels[h])
        theta[e] = logm(np.linalg.solve(A.kernels[t].matrix, head))
    theta = DiscreteForm(mesh, {1: theta})
    identity = DiscreteForm(mesh, {0: np.broadcast_to(np.eye(size), (mesh.count(0), size, size))})

    Omega = conn.curvature_Omega
    conjugated = None
    if Omega is not None and mesh.dimension >= 2:
        index0 = mesh.index(0)
        anchors = [index0[(anchor, ())] for anchor, _dirs in mesh.cells(2)]
        matrices = np.array([A.kernels[v].matrix for v in anchors])
        conjugated = np.linalg.solve(matrices, Omega @ matrices)
    theta2 = theta.wedge(theta).component(2) if mesh.dimension >= 2 else None

    nodes, weights = gauss_legendre(t_nodes)
    total = DiscreteForm.zero(mesh)
    for t, w in zip(nodes, weights):
        if theta2 is None:
            integrand = theta
        else:
            X = t * (1 - t) * theta2
            if Omega is not None:
                X = X + (1 - t) * Omega + t * conjugated
            E = _exp_truncated(DiscreteForm(mesh, {2: X}), identity, mesh.dimension - 1)
            integrand = theta.wedge(E)
        total = total + integrand.trace() * float(w)
    form = DiscreteForm(
        mesh,
        {
            degree: (-1) ** ((degree - 1) // 2) * (2j * np.pi) ** (-((degree + 1) // 2)) * values
            for degree, values in total.components.items()
        },
    )
    closedness, subcomplex, factorization = _audit(form, conn)
    logger.debug(
        "Odd character on %r: closedness %.3e, subcomplex %.3e", mesh, closedness, subcomplex
    )
    return ChernForm(
        form,
        "odd",
        closedness_residual=closedness,
        subcomplex_residual=subcomplex,
        factorization_residual=factorization,
        min_singular_value=float(smallest.min()),
    )


def overlap_gauge_residual(A, conn=None):
    """max difference of the odd character computed from each chart, on cells both charts hold."""
    base = odd_chern(A, conn)
    residual = 0.0
    L = conn.total.base_bundle if conn is not None and conn.total is not None else None
    for (source, target), forward in A.transitions.items():
        moved = []
        for v, kernel in enumerate(A.kernels):
            here = A.chart_kernels[source][v]
            there = A.chart_kernels[target][v]
            moved.append(forward(v, here) if here is not None and there is not None else kernel)
        other = odd_chern(OperatorFamily(A.mesh, moved), conn)
        for degree, values in other.form.components.items():
            mask = np.ones(len(values), dtype=bool)
            if L is not None:
                mask = L.patch(source).masks[degree] & L.patch(target).masks[degree]
            difference = values - base.form.component(degree)
            if mask.any():
                residual = max(residual, float(np.abs(difference[mask]).max()))
    return residual


class IdempotentFamily:
    """Idempotent matrices over the vertices of a base mesh (mesh None for a point)."""

    def __init__(self, mesh, values):
        self.mesh = mesh
        self.values = [np.asarray(v, dtype=complex) for v in values]
        shapes = {v.shape for v in self.values}
        if len(shapes) != 1:
            raise StructuralError("Idempotents of different sizes: {}".format(sorted(shapes)))

    def __len__(self):
        return len(self.values)


def index_family(P):
    """E1 and the constant E0 of every kernel of an operator family."""
    data = [analytic_index(kernel)[1] for kernel in P.kernels]
    sizes = {d.E1.shape for d in data}
    if len(sizes) != 1:
        raise StructuralError("Index idempotents of different sizes across the family")
    return IdempotentFamily(P.mesh, [d.E1 for d in data]), data[0].E0


def _range_frame(e):
    rank = int(round(np.trace(e).real))
    if rank == 0:
        return np.zeros((e.shape[0], 0), dtype=complex)
    u, _s, _vh = np.linalg.svd(e)
    return u[:, :rank]


def plaquette_character(mesh, frames, transports=None):
    """Degree-2 cochain -arg(∏ det link) / 2π over the oriented boundary of every square."""
    tails, heads = edge_ends(mesh)
    links = np.empty(mesh.count(1), dtype=complex)
    for e, (t, h) in enumerate(zip(tails, heads)):
        head = frames[h] if transports is None else transports(e, frames[h])
        links[e] = np.linalg.det(frames[t].conj().T @ head)
    magnitude = np.abs(links)
    if magnitude.min() < 1e-12:
        raise ComputationError(
            "Neighbouring frames are orthogonal; refine the base mesh",
            cell=int(np.argmin(magnitude)),
        )
    links = links / magnitude
    index1 = mesh.index(1)
    values = np.zeros(mesh.count(2))
    for r, (anchor, (a, b)) in enumerate(mesh.cells(2)):
        c1 = mesh.translate(anchor, (a,))
        c3 = mesh.translate(anchor, (b,))
        holonomy = (
            links[index1[(anchor, (a,))]]
            * links[index1[(c1, (b,))]]
            * np.conj(links[index1[(c3, (a,))]])
            * np.conj(links[index1[(anchor, (b,))]])
        )
        values[r] = -np.angle(holonomy) / (2 * np.pi)
    return values


def _even_character(mesh, values, e0, conn=None):
    degree0 = np.array([np.trace(e - e0).real for e in values])
    rounded = np.rint(degree0)
    if np.abs(degree0 - rounded).max() > INTEGER_TOLERANCE or np.ptp(rounded) > 0:
        raise ComputationError(
            "Degree-0 character is not a constant integer: {}".format(degree0[:4])
        )
    constant = float(rounded[0])
    if mesh is None:
        return ChernForm(None, "even", degree0=constant)
    components = {0: degree0}
    if mesh.dimension >= 2:
        components[2] = plaquette_character(mesh, [_range_frame(e) for e in values])
    form = DiscreteForm(mesh, components)
    closedness, subcomplex, factorization = _audit(form, conn)
    return ChernForm(
        form,
        "even",
        degree0=constant,
        closedness_residual=closedness,
        subcomplex_residual=subcomplex,
        factorization_residual=factorization,
    )


def even_chern(e, e0, conn=None):
    """Even Chern character of an idempotent family relative to the constant idempotent e0."""
    e0 = np.asarray(e0, dtype=complex)
    for v, value in enumerate(e.values):
        residual = float(np.abs(value @ value - value).max())
        if residual > IDEMPOTENCY_TOLERANCE:
            raise ComputationError(
                "Sample is not idempotent: residual {:.3e}".format(residual), sample=v
            )
    character = _even_character(e.mesh, e.values, e0, conn)
    logger.debug("Even character: degree 0 = %s", character.degree0)
    return character


class RelativeCharacter:
    """(C̃h(a), Ch(E+) - Ch(E-)) of a symbol on Y = S¹ x X, with the symbol data it came from.

    Attributes:
        odd (ChernForm): odd character of the symbol on the ξ = +∞ copy of Y
        even (DiscreteForm): Ch(E+) - Ch(E-) on Y (zero for trivial E±)
        symbols (list): Laurent coefficients per base vertex
        base (Mesh or None), total (Mesh): X and Y
        cocycle_residual (float): ‖dC̃h(a) - π*(Ch(E+) - Ch(E-))‖
    """

    def __init__(self, odd, even, symbols, base, total, fiber_points):
        self.odd = odd
        self.even = even
        self.symbols = symbols
        self.base = base
        self.total = total
        self.fiber_points = fiber_points
        self.cocycle_residual = (odd.form.d() - even.d()).norm()

    def fiber_pairing(self):
        """Pairing of the degree-1 part with one fiber circle: the winding of det a."""
        return self.odd.pairing(circle_cycle(self.total, 0))


def symbol_total_mesh(base, fiber_points):
    fiber = CircleGrid(fiber_points)
    if base is None:
        return Mesh([fiber])
    return Mesh([fiber] + list(base.factors), base.resolution)


def _symbol_table(symbols):
    """(powers, stack): Laurent coefficients of every vertex over one common list of powers."""
    powers = sorted({int(j) for symbol in symbols for j in symbol})
    r = np.atleast_2d(np.asarray(next(iter(symbols[0].values())))).shape[0]
    stack = np.zeros((len(symbols), len(powers), r, r), dtype=complex)
    for v, symbol in enumerate(symbols):
        for j, a in symbol.items():
            a = np.atleast_2d(np.asarray(a, dtype=complex))
            if a.shape != (r, r):
                raise StructuralError("Symbol coefficients of different sizes", sample=v)
            stack[v, powers.index(int(j))] = a
    return np.array(powers), stack


def _corner_bits(m):
    return np.array(list(itertools.product((0, 1), repeat=m)), dtype=bool).reshape(2 ** m, m)


def _multilinear_weights(u, bits):
    """Corner weights at the points u, and their derivatives along every axis."""
    factors = np.where(bits[None, :, :], u[:, None, :], 1.0 - u[:, None, :])
    weights = factors.prod(axis=2)
    derivatives = [
        np.delete(factors, i, axis=2).prod(axis=2) * np.where(bits[:, i], 1.0, -1.0)[None, :]
        for i in range(bits.shape[1])
    ]
    return weights, derivatives


def _cell_corners(base, anchor, dirs):
    if base is None:
        return [0]
    index0 = base.index(0)
    return [
        index0[(base.translate(anchor, dirs, offsets), ())]
        for offsets in itertools.product((0, 1), repeat=len(dirs))
    ]


def _symbol_cell_integrals(dirs, fiber_anchors, corners, powers, stack, fiber_points, order):
    """Odd character of the interpolated symbol integrated over cells of one shape.

    Along the fiber the symbol is its Laurent polynomial; across base cells the coefficients
    are interpolated multilinearly from the corners.

    Returns:
        (integrals or None when the symbol degenerates, smallest singular value per cell)
    """
    k = len(dirs)
    along_fiber = int(dirs[0] == 0)
    nodes, weights = gauss_legendre(order)
    grid = np.array(list(itertools.product(range(order), repeat=k)))
    u = nodes[grid]
    quadrature = weights[grid].prod(axis=1)
    corner_weights, corner_derivatives = _multilinear_weights(
        u[:, along_fiber:], _corner_bits(k - along_fiber)
    )
    step = 2 * np.pi / fiber_points
    offset = u[:, 0] if along_fiber else np.zeros(len(u))
    theta = step * (np.asarray(fiber_anchors, dtype=float)[:, None] + offset[None, :])
    phases = np.exp(1j * theta[..., None] * powers)
    coefficients = stack[np.asarray(corners)]
    A = np.einsum("qc,ncjab->nqjab", corner_weights, coefficients)
    g = np.einsum("nqj,nqjab->nqab", phases, A)
    tangents = []
    if along_fiber:
        tangents.append(step * np.einsum("nqj,nqjab->nqab", 1j * powers * phases, A))
    for derivative in corner_derivatives:
        tangents.append(np.einsum("qc,ncjab,nqj->nqab", derivative, coefficients, phases))
    smallest = np.linalg.svd(g, compute_uv=False)[..., -1].min(axis=1)
    if smallest.min() < INVERTIBILITY_LIMIT:
        return None, smallest
    omega = [np.linalg.solve(g, tangent) for tangent in tangents]
    if k == 1:
        density = np.trace(omega[0], axis1=-2, axis2=-1)
    else:
        commutator = omega[1] @ omega[2] - omega[2] @ omega[1]
        density = np.trace(omega[0] @ commutator, axis1=-2, axis2=-1)
    return ODD_DENSITY[k] * (density @ quadrature), smallest


def _symbol_odd_form(Y, base, symbols, order):
    powers, stack = _symbol_table(symbols)
    classes = {}
    vertex_class = [classes.setdefault(stack[v].tobytes(), len(classes)) for v in range(len(stack))]
    fiber_points = Y.factors[0].points
    components, smallest = {}, np.inf
    for degree in ODD_DENSITY:
        if degree > Y.dimension:
            continue
        values = np.zeros(Y.count(degree), dtype=complex)
        groups = {}
        for row, (anchor, dirs) in enumerate(Y.cells(degree)):
            base_dirs = tuple(axis - 1 for axis in dirs if axis)
            corners = _cell_corners(base, anchor[1:], base_dirs)
            # equal corners: every derivative along the base vanishes
            if base_dirs and len({vertex_class[c] for c in corners}) == 1:
                continue
            groups.setdefault(dirs, []).append((row, anchor[0], corners))
        for dirs, members in groups.items():
            for start in range(0, len(members), SYMBOL_CELL_BATCH):
                rows, fiber_anchors, corners = zip(*members[start : start + SYMBOL_CELL_BATCH])
                integrals, lowest = _symbol_cell_integrals(
                    dirs, fiber_anchors, corners, powers, stack, fiber_points, order
                )
                worst = int(np.argmin(lowest))
                smallest = min(smallest, float(lowest[worst]))
                if integrals is None:
                    raise ComputationError(
                        "Symbol is not invertible on S*(Y/X): smallest singular value "
                        "{:.3e}".format(lowest[worst]),
                        cell=rows[worst],
                    )
                values[list(rows)] = integrals
        components[degree] = values
    return DiscreteForm(Y, components), smallest


def relative_symbol_chern(symbols, base=None, fiber_points=8, order=SYMBOL_QUADRATURE_ORDER):
    """Relative character of a symbol given by Laurent coefficients per base vertex.

    The odd part is the odd character of the symbol integrated over every cell of Y, with the
    coefficients interpolated multilinearly across base cells, so its periods are those of a
    continuous map. E± are trivial bundles of the symbol's rank and the even part vanishes.
    """
    if isinstance(symbols, dict):
        symbols = [symbols]
    expected = 1 if base is None else base.count(0)
    if len(symbols) != expected:
        raise StructuralError(
            "{} symbols for {} base vertices".format(len(symbols), expected)
        )
    Y = symbol_total_mesh(base, fiber_points)
    form, smallest = _symbol_odd_form(Y, base, symbols, order)
    odd = ChernForm(
        form, "odd", closedness_residual=form.d().norm(), min_singular_value=smallest
    )
    rel = RelativeCharacter(odd, DiscreteForm.zero(Y), symbols, base, Y, fiber_points)
    logger.debug("Relative character on %r: cocycle residual %.3e", Y, rel.cocycle_residual)
    return rel


def fiber_pushforward(form, base=None):
    """Integral over the fiber circle of a form on Y = S¹ x X.

    The degree-k value on a cell c of X sums the degree-(k+1) values of the cells
    [x, x + 1] x c, fiber direction first, so that ∫ over S¹ x Z equals ∫ over Z of the result.

    Returns:
        DiscreteForm on the base, or a dict of length-one arrays over a point base.
    """
    Y = form.mesh
    points = Y.factors[0].points
    components = {}
    for degree, values in form.components.items():
        if degree == 0:
            continue
        cells = [((), ())] if base is None else base.cells(degree - 1)
        index = Y.index(degree)
        pushed = np.zeros((len(cells),) + values.shape[1:], dtype=values.dtype)
        for r, (anchor, dirs) in enumerate(cells):
            shifted = (0,) + tuple(axis + 1 for axis in dirs)
            pushed[r] = sum(values[index[((x,) + anchor, shifted)]] for x in range(points))
        components[degree - 1] = pushed
    return components if base is None else DiscreteForm(base, components)


def companion_pencil(coefficients):
    """(A, B) with det(A + zB) = det(Σ b_j z^j), for polynomial coefficients b_0..b_d."""
    d = len(coefficients) - 1
    r = coefficients[0].shape[0]
    A = np.zeros((d * r, d * r), dtype=complex)
    B = np.eye(d * r, dtype=complex)
    B[(d - 1) * r :, (d - 1) * r :] = coefficients[d]
    for i in range(d):
        A[i * r : (i + 1) * r, (d - 1) * r :] = coefficients[i]
        if i:
            A[i * r : (i + 1) * r, (i - 1) * r : i * r] = -np.eye(r)
    return A, B


def riesz_projection(symbol, nodes=CONTOUR_NODES):
    """Spectral projection of the linearized symbol on the zeros inside the unit disk.

    Returns:
        (Π, shift): the idempotent and the rank correction j_min · r from negative powers.
    """
    symbol = {int(j): np.atleast_2d(np.asarray(a, dtype=complex)) for j, a in symbol.items()}
    r = next(iter(symbol.values())).shape[0]
    j_min = min(min(symbol), 0)
    j_max = max(symbol)
    shifted = [symbol.get(j, np.zeros((r, r))) for j in range(j_min, j_max + 1)]
    if len(shifted) == 1:
        return np.zeros((0, 0), dtype=complex), j_min * r
    A, B = companion_pencil(shifted)
    z = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    projection = sum(np.linalg.solve(A + zk * B, B) * zk for zk in z) / nodes
    return projection, j_min * r


def _topological_sign():
    todd = grr_check(4)["todd"].coefficient(0)
    return (-1) ** VERTICAL_COTANGENT_DIMENSION * float(todd)


def index_in_cohomology(rel, scenario=None):
    """Topological index character on X: (-1)^n φ_* ρ_*(Todd ∧ C̃h(a)) with Todd = 1 on circle fibers.

    ρ_* keeps the ξ = +∞ boundary value C̃h(a); Ch(E±) is pulled back from Y and has no
    component along ξ. The degree 2k+1 part enters the fiber integral multiplied by (-1)^k.
    """
    sign = _topological_sign()
    odd = rel.odd.form
    converted = DiscreteForm(
        odd.mesh, {k: (-1) ** ((k - 1) // 2) * v for k, v in odd.components.items()}
    )
    pushed = fiber_pushforward(converted, rel.base)
    components = pushed if rel.base is None else pushed.components
    size = 1 if rel.base is None else rel.base.count(0)
    winding = np.real(components.get(0, np.zeros(size)))
    rounded = np.rint(winding)
    if np.abs(winding - rounded).max() > INTEGER_TOLERANCE or np.ptp(rounded) > 0:
        raise ComputationError(
            "Fiber winding is not a constant integer: {}".format(winding[:4])
        )
    degree0 = sign * float(rounded[0])
    if rel.base is None:
        result = ChernForm(None, "even", degree0=degree0)
    else:
        form = sign * DiscreteForm(rel.base, {k: np.real(v) for k, v in components.items()})
        result = ChernForm(form, "even", degree0=degree0, closedness_residual=form.d().norm())
    logger.info(
        "Topological character%s: degree 0 = %s",
        "" if scenario is None else " of {}".format(getattr(scenario, "name", scenario)),
        degree0,
    )
    return result


def index_bundle_character(rel):
    """Ch of the index bundle from the Riesz projections of the linearized symbol.

    Evaluates the class of index_in_cohomology without C̃h(a), with the same sign.
    """
    sign = _topological_sign()
    projections, shifts = zip(*(riesz_projection(s) for s in rel.symbols))
    if len(set(shifts)) != 1:
        raise ValidationError("Symbol degrees vary across the base")
    shift = shifts[0]
    size = projections[0].shape[0]
    for v, projection in enumerate(projections):
        residual = float(np.abs(projection @ projection - projection).max()) if size else 0.0
        if residual > 1e-8:
            raise ComputationError(
                "Contour projection is not idempotent: {:.3e}".format(residual), sample=v
            )
    character = _even_character(rel.base, projections, np.zeros((size, size)))
    degree0 = sign * (character.degree0 + shift)
    if character.form is None:
        return ChernForm(None, "even", degree0=degree0)
    components = dict(character.form.components)
    components[0] = np.full(rel.base.count(0), character.degree0 + shift)
    return ChernForm(sign * DiscreteForm(rel.base, components), "even", degree0=degree0)


X = sympy.Symbol("x")


class FormalSeries:
    """Truncated power series in a degree-2 variable with exact rational coefficients.

    Attributes:
        variable (str)
        coefficients (dict): power -> Fraction, powers p with 2p <= max_degree
        max_degree (int): truncation in cohomological degree
    """

    def __init__(self, variable, coefficients, max_degree):
        if max_degree < 4:
            raise ValidationError("Truncation degree must be at least 4, got {}".format(max_degree))
        self.variable = variable
        self.max_degree = int(max_degree)
        self.coefficients = {
            int(p): Fraction(c) for p, c in coefficients.items() if 2 * p <= max_degree and c
        }

    @classmethod
    def from_expression(cls, expression, max_degree, variable="x"):
        order = max_degree // 2
        polynomial = sympy.series(expression, X, 0, order + 1).removeO()
        coefficients = {}
        for power in range(order + 1):
            c = sympy.Rational(polynomial.coeff(X, power))
            coefficients[power] = Fraction(int(c.p), int(c.q))
        return cls(variable, coefficients, max_degree)

    def coefficient(self, power):
        return self.coefficients.get(power, Fraction(0))

    def __mul__(self, other):
        if self.variable != other.variable:
            raise StructuralError("Series in different variables")
        degree = min(self.max_degree, other.max_degree)
        product = {}
        for p, a in self.coefficients.items():
            for q, b in other.coefficients.items():
                if 2 * (p + q) <= degree:
                    product[p + q] = product.get(p + q, Fraction(0)) + a * b
        return FormalSeries(self.variable, product, degree)

    def __add__(self, other):
        degree = min(self.max_degree, other.max_degree)
        keys = set(self.coefficients) | set(other.coefficients)
        return FormalSeries(
            self.variable,
            {p: self.coefficient(p) + other.coefficient(p) for p in keys},
            degree,
        )

    def __eq__(self, other):
        return (
            isinstance(other, FormalSeries)
            and self.variable == other.variable
            and self.coefficients == other.coefficients
        )

    def __repr__(self):
        terms = " + ".join(
            "{}*{}^{}".format(c, self.variable, p) for p, c in sorted(self.coefficients.items())
        )
        return "FormalSeries({}; deg <= {})".format(terms or "0", self.max_degree)


def grr_check(max_degree=4):
    """Todd(x) = x / (1 - e^-x) and ch(x) = e^x, and the degree-4 part of their product.

    The degree-4 coefficient c gives c_1(det Λ) = c π_*(x²) and c_1(𝓛) = 12 c e_1.
    """
    if max_degree < 4:
        raise ValidationError("grr_check needs max_degree >= 4, got {}".format(max_degree))
    todd = FormalSeries.from_expression(X / (1 - sympy.exp(-X)), max_degree)
    ch = FormalSeries.from_expression(sympy.exp(X), max_degree)
    product = todd * ch
    degree4 = product.coefficient(2)
    return {
        "todd": todd,
        "ch": ch,
        "product": product,
        "degree4_coefficient": degree4,
        "mmm_relation": (degree4, 12 * degree4),
    }
