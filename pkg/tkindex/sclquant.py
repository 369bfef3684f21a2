"""Semiclassical quantization on circle fibers.

Symbols a(θ, ξ) are quantized on the Fourier band by the left (standard) rule
Op_ε(a) e^{ilθ} = a(θ, εl) e^{ilθ}, so the matrix entry (k, l) is the (k - l)-th θ-Fourier
coefficient of a(·, εl). Composition is multiplicative up to O(ε).
"""
import logging
import math

import numpy as np

from tkindex.cherncalc import IdempotentFamily, odd_chern, relative_symbol_chern
from tkindex.fiberops import OperatorFamily, TruncatedKernel, analytic_index, bott_projector
from tkindex.forms import CircleGrid, Mesh, circle_cycle
from tkindex.utils import ComputationError, ValidationError, convergence_verdict


logger = logging.getLogger(__name__)

DEFAULT_EPS_GRID = (1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128)
MIN_EPS_VALUES = 4
MIN_SLOPE = 0.9
DEFECT_FLOOR = 1e-12
# extra modes past the ξ-support so products stay inside the band
THETA_MARGIN = 16
ENVELOPE_TOLERANCE = 1e-5
POLISH_TOLERANCE = 1e-12
POLISH_ITERATIONS = 50
SPECTRAL_GAP = 0.1
CONTOUR_NODES = 64
RESTRICTION_EPS = 0.5
# the compactified mode loop is a circle mesh and needs at least eight points
MIN_LOOP_CUTOFF = 4
TRANSITION_WIDTH = 2.0
DEFAULT_SUPPORT = 16.0
# Laurent modes of the compactified ξ-line symbol
COMPACTIFICATION_MODES = 64


class SclSymbol:
    """A symbol a(θ, ξ) with values that stop depending on ξ outside |ξ| <= support_radius.

    Attributes:
        func: vectorized callable (theta, xi) -> array of scalars or of r x r matrices
        support_radius (float)
        rank (int)
        label (str)
    """

    def __init__(self, func, support_radius, label=""):
        if support_radius <= 0:
            raise ValidationError("Support radius must be positive, got {}".format(support_radius))
        self.func = func
        self.support_radius = float(support_radius)
        self.label = label
        theta = 2 * np.pi * np.arange(16) / 16
        self.rank = self.sample(theta[:1], [0.0]).shape[-1]
        for sign in (-1, 1):
            edge = self.sample(theta, [sign * self.support_radius])
            far = self.sample(theta, sign * self.support_radius * np.array([1.5, 2.0, 4.0]))
            excess = float(np.abs(far - edge).max())
            if excess > ENVELOPE_TOLERANCE:
                raise ValidationError(
                    "Symbol {} still varies by {:.3e} outside |xi| <= {}".format(
                        label or "", excess, self.support_radius
                    )
                )

    def sample(self, theta, xi):
        """Values on the grid theta x xi, shape (len(theta), len(xi), r, r)."""
        T, X = np.meshgrid(np.asarray(theta, dtype=float), np.asarray(xi, dtype=float), indexing="ij")
        values = np.asarray(self.func(T, X), dtype=complex)
        if values.ndim == 2:
            values = values[:, :, None, None]
        return values

    def inverse(self):
        return SclSymbol(
            lambda theta, xi: np.linalg.inv(self.sample_pointwise(theta, xi)),
            self.support_radius,
            label="inverse {}".format(self.label),
        )

    def sample_pointwise(self, theta, xi):
        values = np.asarray(self.func(theta, xi), dtype=complex)
        if values.ndim == np.ndim(theta):
            values = values[..., None, None]
        return values

    def __mul__(self, other):
        return SclSymbol(
            lambda theta, xi: self.sample_pointwise(theta, xi) @ other.sample_pointwise(theta, xi),
            max(self.support_radius, other.support_radius),
            label="{}*{}".format(self.label, other.label),
        )

    def __repr__(self):
        return "<SclSymbol {} R={} rank={}>".format(self.label, self.support_radius, self.rank)


class SclFamily:
    """Quantizations of a symbol family over a grid of ε.

    Attributes:
        epsilons (tuple): decreasing values in (0, 1)
        operators (list): per ε, the TruncatedKernel of every base vertex
        source_symbol (SclSymbol or list): the symbol, or one per base vertex
        inverses (list or None): polished inverses, laid out like operators
        polish_residuals (list): worst polish residual per ε
        base (Mesh or None)
    """

    def __init__(
        self, epsilons, operators, source_symbol, inverses=None, polish_residuals=None, base=None
    ):
        self.epsilons = tuple(epsilons)
        self.operators = list(operators)
        self.source_symbol = source_symbol
        self.inverses = inverses
        self.polish_residuals = polish_residuals or []
        self.base = base

    def restricted(self, eps=RESTRICTION_EPS):
        """The members at ε, as a family over the base."""
        for value, members in zip(self.epsilons, self.operators):
            if math.isclose(value, eps):
                return OperatorFamily(self.base, list(members), label="scl eps={}".format(eps))
        raise ValidationError("The family was not quantized at eps {}".format(eps))


def required_cutoff(a, eps):
    return int(math.ceil(a.support_radius / eps))


def theta_points(N):
    """θ-grid size: every mode difference in the band has its own Fourier bin."""
    return 4 * N + 2


def quantize(a, eps, N):
    if not 0 < eps < 1:
        raise ValidationError("eps must lie in (0, 1), got {}".format(eps))
    required = required_cutoff(a, eps)
    if N < required:
        raise ValidationError(
            "Band N={} does not cover the symbol support at eps {}; need N >= {}".format(
                N, eps, required
            )
        )
    modes = np.arange(-N, N + 1)
    G = theta_points(N)
    samples = a.sample(2 * np.pi * np.arange(G) / G, eps * modes)
    coefficients = np.fft.fft(samples, axis=0) / G
    columns = np.arange(len(modes))
    blocks = coefficients[(modes[:, None] - modes[None, :]) % G, columns[None, :]]
    r = a.rank
    matrix = blocks.transpose(0, 2, 1, 3).reshape(len(modes) * r, len(modes) * r)
    return TruncatedKernel(N, matrix, rank=r)


def symbol_of_kernel(K, eps):
    """Left symbol σ(θ_j, εl) = Σ_k K(k, l) e^{i(k - l)θ_j} on the θ-grid of the band.

    Returns:
        (theta, xi, values) with values of shape (len(theta), len(xi), r, r)
    """
    N, r = K.N, K.rank
    modes = np.arange(-N, N + 1)
    G = theta_points(N)
    blocks = K.matrix.reshape(len(modes), r, len(modes), r).transpose(0, 2, 1, 3)
    placed = np.zeros((G, len(modes), r, r), dtype=complex)
    columns = np.arange(len(modes))
    for row in range(len(modes)):
        placed[(row - columns) % G, columns] += blocks[row, columns]
    values = np.fft.ifft(placed, axis=0) * G
    return 2 * np.pi * np.arange(G) / G, eps * modes, values


def composition_defect_at(a, b, eps, N=None):
    """(sup |σ(Op(a) Op(b)) - ab| over the support columns, band cutoff) at one ε."""
    support = max(required_cutoff(a, eps), required_cutoff(b, eps))
    cutoff = N if N is not None else support + THETA_MARGIN
    composed = quantize(a, eps, cutoff) @ quantize(b, eps, cutoff)
    theta, xi, values = symbol_of_kernel(composed, eps)
    inner = np.abs(np.arange(-cutoff, cutoff + 1)) <= support
    expected = (a * b).sample(theta, xi[inner])
    defect = float(np.abs(values[:, inner] - expected).max())
    logger.debug("Composition defect at eps %s (N=%s): %.3e", eps, cutoff, defect)
    return defect, cutoff


def scl_composition_defect(a, b, eps_grid=DEFAULT_EPS_GRID, N=None):
    """sup |σ(Op(a) Op(b)) - ab| over the support columns, per ε, with its log-log slope."""
    eps_grid = sorted(eps_grid, reverse=True)
    if len(eps_grid) < MIN_EPS_VALUES:
        raise ValidationError(
            "A slope fit needs at least {} eps values, got {}".format(MIN_EPS_VALUES, len(eps_grid))
        )
    defects, cutoffs = [], []
    for eps in eps_grid:
        defect, cutoff = composition_defect_at(a, b, eps, N)
        defects.append(defect)
        cutoffs.append(cutoff)
    report = convergence_verdict(eps_grid, defects, min_slope=MIN_SLOPE, floor=DEFECT_FLOOR)
    report.update({"eps": list(eps_grid), "defects": defects, "N": cutoffs})
    return report


def recovery_defect(a, eps, N=None):
    """sup |σ(Op(a)) - a| on the θ-grid of the band; zero up to roundoff."""
    N = N if N is not None else required_cutoff(a, eps)
    theta, xi, values = symbol_of_kernel(quantize(a, eps, N), eps)
    return float(np.abs(values - a.sample(theta, xi)).max())


def _gaussian(theta, xi):
    return np.exp(-(xi ** 2)) + 0 * theta


def _modulated(theta, xi):
    return (1 + 0.5 * np.cos(theta)) * np.exp(-(xi ** 2))


def _multiplier(theta, xi):
    return 1 + 0.5 * np.cos(theta) + 0 * xi


# scalar symbols the composition checks run over, as (func, support radius)
SYMBOL_CATALOG = {
    "gaussian": (_gaussian, 4.0),
    "modulated": (_modulated, 4.0),
    "multiplier": (_multiplier, 1.0),
}


def catalog_symbol(name):
    try:
        func, support = SYMBOL_CATALOG[name]
    except KeyError:
        raise ValidationError("Unknown symbol {!r}".format(name), key=name)
    return SclSymbol(func, support, label=name)


def transition(xi, width=TRANSITION_WIDTH):
    """ψ(ξ) = (1 + tanh(ξ / width)) / 2, from 0 at ξ = -∞ to 1 at ξ = +∞."""
    return 0.5 * (1.0 + np.tanh(np.asarray(xi) / width))


def winding_symbol(width=TRANSITION_WIDTH, support=DEFAULT_SUPPORT):
    """Id + a with Id + a = exp(2πi ψ(ξ)): winds once as ξ runs through the real line."""
    return SclSymbol(
        lambda theta, xi: np.exp(2j * np.pi * transition(xi, width)) + 0 * theta,
        support,
        label="winding",
    )


def _newton_schulz(A, B):
    """Polishes an approximate inverse B of A by B <- B(2 - AB)."""
    identity = np.eye(A.shape[0])
    residual = float(np.abs(A @ B - identity).max())
    for _ in range(POLISH_ITERATIONS):
        if residual < POLISH_TOLERANCE:
            break
        B = B @ (2 * identity - A @ B)
        residual = float(np.abs(A @ B - identity).max())
    return B, residual


def _vertex_symbols(a, base):
    """One symbol per base vertex (a single vertex over a point)."""
    count = 1 if base is None else base.count(0)
    if isinstance(a, (list, tuple)):
        if len(a) != count:
            raise ValidationError(
                "Got {} symbols for {} base vertices".format(len(a), count)
            )
        return list(a)
    return [a or winding_symbol()] * count


def odd_scl_index(a=None, scenario=None, eps_grid=(RESTRICTION_EPS,), base=None):
    """Quantizes an invertible symbol family over the ε-grid and polishes every member to an
    exact inverse.

    `a` is one symbol, constant over the base, or a list with one symbol per base vertex. The
    inverse symbol's quantization seeds a Newton–Schulz iteration.
    """
    symbols = _vertex_symbols(a, base)
    operators, inverses, residuals = [], [], []
    eps_grid = sorted(eps_grid, reverse=True)
    for eps in eps_grid:
        quantized, members, polished, worst = {}, [], [], 0.0
        for vertex, symbol in enumerate(symbols):
            if id(symbol) not in quantized:
                quantized[id(symbol)] = _polished_quantization(symbol, eps, scenario, vertex)
            A, B, residual = quantized[id(symbol)]
            members.append(A)
            polished.append(B)
            worst = max(worst, residual)
        operators.append(members)
        inverses.append(polished)
        residuals.append(worst)
    logger.info("Odd semiclassical family over eps %s: polish residuals %s", eps_grid, residuals)
    source = symbols[0] if base is None else symbols
    return SclFamily(
        eps_grid, operators, source, inverses=inverses, polish_residuals=residuals, base=base
    )


def _polished_quantization(a, eps, scenario, vertex):
    N = max(required_cutoff(a, eps), getattr(scenario, "N", 0) or 0, MIN_LOOP_CUTOFF)
    A = quantize(a, eps, N)
    B, residual = _newton_schulz(A.matrix, quantize(a.inverse(), eps, N).matrix)
    if residual >= POLISH_TOLERANCE:
        smallest = float(np.linalg.svd(A.matrix, compute_uv=False).min())
        raise ComputationError(
            "Invertibility not restored after {} iterations at eps {}: residual {:.3e}, "
            "smallest singular values {:.3e}".format(POLISH_ITERATIONS, eps, residual, smallest),
            scenario=getattr(scenario, "name", None),
            sample=vertex,
        )
    return A, TruncatedKernel(N, B, rank=A.rank), residual


def mode_loop(family, eps=RESTRICTION_EPS, theta=0.0, vertex=0):
    """The recovered symbol at θ along the mode line, closed up at the band ends, as a family
    over a circle mesh whose vertices are the modes."""
    kernel = family.restricted(eps).kernels[vertex]
    grid, _xi, values = symbol_of_kernel(kernel, eps)
    row = int(np.argmin(np.abs(grid - theta)))
    mesh = Mesh([CircleGrid(len(values[row]))])
    return OperatorFamily(
        mesh,
        [TruncatedKernel(0, value, rank=kernel.rank) for value in values[row]],
        label="mode loop",
    )


def odd_scl_pairing(family, eps=RESTRICTION_EPS, vertex=0):
    """Pairing of the odd character of the restricted family with the compactified mode circle."""
    loop = mode_loop(family, eps, vertex=vertex)
    return odd_chern(loop).pairing(circle_cycle(loop.mesh, 0))


def compactified_symbol(a, theta=0.0, modes=COMPACTIFICATION_MODES):
    """Laurent coefficients of φ ↦ a(θ, R tan((φ - π) / 2)), the ξ-line closed up at ±∞.

    R is a quarter of the support radius. The samples sit at φ = 2π(g + 1/2)/G so that none
    falls on the point at infinity.

    Returns:
        dict power -> r x r matrix, powers -modes..modes
    """
    G = 4 * modes
    phi = 2 * np.pi * (np.arange(G) + 0.5) / G
    xi = a.support_radius / 4 * np.tan((phi - np.pi) / 2)
    samples = a.sample([theta], xi)[0]
    coefficients = np.fft.fft(samples, axis=0) / G
    return {
        j: coefficients[j % G] * np.exp(-1j * np.pi * j / G) for j in range(-modes, modes + 1)
    }


def relative_scl_pairings(a, base=None, theta=0.0, modes=COMPACTIFICATION_MODES):
    """Fiber pairings of the relative character of the compactified symbol, one per base vertex."""
    symbols = _vertex_symbols(a, base)
    cache = {}
    for symbol in symbols:
        if id(symbol) not in cache:
            cache[id(symbol)] = compactified_symbol(symbol, theta, modes)
    coefficients = [cache[id(symbol)] for symbol in symbols]
    rel = relative_symbol_chern(
        coefficients if base is not None else coefficients[0],
        base=base,
        fiber_points=2 * modes,
    )
    if base is None:
        return [rel.fiber_pairing()]
    return [rel.odd.pairing(circle_cycle(rel.total, 0, anchor)) for anchor, _dirs in base.cells(0)]


def symbol_winding(a, theta=0.0, samples=4096):
    """Winding of det a(θ, ·) along the ξ-line, read from the symbol directly."""
    R = 4 * a.support_radius
    xi = np.linspace(-R, R, samples)
    det = np.linalg.det(a.sample([theta], xi)[0])
    phase = np.unwrap(np.angle(np.append(det, det[0])))
    return float((phase[-1] - phase[0]) / (2 * np.pi))


def bott_line_symbol(width=TRANSITION_WIDTH, support=DEFAULT_SUPPORT):
    """q = v v* with v = (cos(πψ/2), e^{iθ} sin(πψ/2)); q -> e1e1* at ξ = -∞ and e2e2* at +∞."""

    def func(theta, xi):
        angle = 0.5 * np.pi * transition(xi, width)
        v = np.stack([np.cos(angle) + 0j, np.exp(1j * theta) * np.sin(angle)], axis=-1)
        return v[..., :, None] * v[..., None, :].conj()

    return SclSymbol(func, support, label="bott-line")


def reference_projection(N, rank_pattern):
    """Mode-diagonal projection: the first pattern below mode 0, the second from mode 0 up."""
    below, above = (np.asarray(p, dtype=complex) for p in rank_pattern)
    blocks = [below if k < 0 else above for k in range(-N, N + 1)]
    size = below.shape[0]
    matrix = np.zeros((len(blocks) * size, len(blocks) * size), dtype=complex)
    for i, block in enumerate(blocks):
        matrix[i * size : (i + 1) * size, i * size : (i + 1) * size] = block
    return matrix


def contour_projection(P, nodes=CONTOUR_NODES, center=1.0, radius=0.5):
    """(1/2πi)∮(z - P)⁻¹ dz over |z - center| = radius, then McWeeny steps E <- 3E² - 2E³."""
    eigenvalues = np.linalg.eigvals(P)
    closest = float(np.abs(eigenvalues - 0.5).min())
    if closest < SPECTRAL_GAP:
        raise ComputationError(
            "Quantized projection has spectrum {:.3e} from 1/2; refine eps".format(closest)
        )
    identity = np.eye(P.shape[0])
    E = np.zeros_like(P, dtype=complex)
    for j in range(nodes):
        z = center + radius * np.exp(2j * np.pi * j / nodes)
        E += np.linalg.solve(z * identity - P, identity) * (z - center)
    E /= nodes
    residual = float(np.abs(E @ E - E).max())
    for _ in range(POLISH_ITERATIONS):
        if residual <= POLISH_TOLERANCE:
            break
        E2 = E @ E
        E = 3 * E2 - 2 * E2 @ E
        residual = float(np.abs(E @ E - E).max())
    if residual > POLISH_TOLERANCE:
        raise ComputationError("Contour projection did not polish: residual {:.3e}".format(residual))
    return E, residual


def even_scl_index(p=None, scenario=None, eps=RESTRICTION_EPS, reference=None, base=None):
    """Exact idempotents from the quantization of an idempotent-valued symbol at ε.

    Over a sphere base the Bott projector p_B(x) twists the symbol into
    p_B ⊗ q + (1 - p_B) ⊗ Π_ref.

    Returns:
        (IdempotentFamily, E0): E0 is the quantized reference projection Π_ref.
    """
    p = p or bott_line_symbol()
    reference = reference if reference is not None else (np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    for sign, limit in zip((-1, 1), reference):
        edge = p.sample([0.0], [sign * 4 * p.support_radius])[0, 0]
        if np.abs(edge - limit).max() > ENVELOPE_TOLERANCE:
            raise ValidationError("Symbol does not tend to the reference projection at {}inf".format(
                "-" if sign < 0 else "+"))
    theta = 2 * np.pi * np.arange(16) / 16
    samples = p.sample(theta, np.linspace(-p.support_radius, p.support_radius, 33))
    if np.abs(samples @ samples - samples).max() > 1e-10:
        raise ValidationError("Symbol is not idempotent-valued")
    N = max(required_cutoff(p, eps), getattr(scenario, "N", 0) or 0)
    Q = quantize(p, eps, N).matrix
    E0_line = reference_projection(N, reference)
    if base is None:
        E, residual = contour_projection(Q)
        logger.info("Even semiclassical index: idempotency residual %.3e", residual)
        return IdempotentFamily(None, [E]), E0_line
    values = []
    for vertex, x in enumerate(_sphere_points(base)):
        pB = bott_projector(x)
        P = np.kron(pB, Q) + np.kron(np.eye(2) - pB, E0_line)
        try:
            E, _residual = contour_projection(P)
        except ComputationError as e:
            e.context["sample"] = vertex
            raise
        values.append(E)
    return IdempotentFamily(base, values), np.kron(np.eye(2), E0_line)


def _sphere_points(base):
    kinds = [f.kind for f in base.factors]
    if "sphere" not in kinds:
        raise ValidationError("The twisted even symbol needs a sphere base")
    o = base.offsets[kinds.index("sphere")]
    return base.vertex_positions()[:, o : o + 3]


def isotropic_bott_operator(N, eps, reference):
    """x + iεD in the first N Hermite functions of scale `reference`, mapping N modes to N - 1.

    In the ladder operators of the reference oscillator x + iεD = α a + β a† with
    α = (s + ε)/√(2s) and β = (s - ε)/√(2s).
    """
    if N < 2:
        raise ValidationError("The Hermite truncation needs at least two functions")
    alpha = (reference + eps) / math.sqrt(2 * reference)
    beta = (reference - eps) / math.sqrt(2 * reference)
    matrix = np.zeros((N - 1, N))
    for n in range(N):
        if n >= 1:
            matrix[n - 1, n] = alpha * math.sqrt(n)
        if n + 1 <= N - 2:
            matrix[n + 1, n] = beta * math.sqrt(n + 1)
    return TruncatedKernel(0, matrix, domain=tuple(range(N)), codomain=tuple(range(N - 1)))


def thom_ground_state(N, eps, reference):
    """(index, ground-state projector trace, ground-state mass inside the first N functions)."""
    R, _data = analytic_index(isotropic_bott_operator(N, eps, reference))
    wide, _ = analytic_index(isotropic_bott_operator(2 * N, eps, reference))
    ground = np.linalg.eigh(wide.S0)[1][:, -1]
    mass = float(np.sum(np.abs(ground[:N]) ** 2))
    return R.index, float(np.trace(R.S0).real), mass


def thom_isotropic_check(N=32, eps_grid=(0.5, 0.25)):
    """Index of the isotropic quantization of the Bott symbol x + iξ on R²; returns 1."""
    reference = eps_grid[0]
    indices = set()
    for eps in eps_grid:
        index, trace, mass = thom_ground_state(N, eps, reference)
        if mass < 1 - 1e-8:
            raise ComputationError(
                "Hermite truncation N={} holds only {:.10f} of the ground state at eps {}".format(
                    N, mass, eps
                )
            )
        logger.debug("Thom check eps=%s: index %s, ground trace %.12f", eps, index, trace)
        indices.add(index)
    if len(indices) != 1:
        raise ComputationError("Isotropic index changes along the eps grid: {}".format(sorted(indices)))
    return indices.pop()
