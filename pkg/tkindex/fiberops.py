"""Truncated operator algebra on circle fibers.

A fiber operator is a matrix in the orthonormal Fourier basis e^{ikθ} of L²(S¹), with modes
-N..N, tensored with C^r. Rows and columns are labelled by explicit mode tuples so graded
truncations (different domain and codomain modes) can carry a non-zero index; the basis is
mode-major, so the entry for (mode k, component c) sits at position index(k) * r + c.
"""
import logging

import numpy as np

from tkindex.utils import ComputationError, StructuralError, ValidationError


logger = logging.getLogger(__name__)

DEFAULT_N = 32
CONDITION_LIMIT = 1e12
IDEMPOTENCY_TOLERANCE = 1e-9
# McWeeny steps E <- 3E² - 2E³ on the index idempotent
POLISH_STEPS = 4
POLISH_TARGET = 1e-13


def band(N):
    return tuple(range(-N, N + 1))


class TruncatedKernel:
    """Fiber operator on the truncated Fourier band.

    Attributes:
        N (int): cutoff
        matrix (np.ndarray): (r * len(codomain)) x (r * len(domain)) complex entries
        rank (int): r, the dimension of the coefficient bundle
        domain, codomain (tuple): mode labels of the columns and rows
        codomain_projection (np.ndarray or None): orthogonal projector onto the modes the
            operator is allowed to reach (None means all of the codomain)
        truncation (float): Frobenius mass dropped when the kernel was produced
    """

    def __init__(
        self,
        N,
        matrix,
        rank=1,
        domain=None,
        codomain=None,
        codomain_projection=None,
        truncation=0.0,
    ):
        self.N = int(N)
        self.rank = int(rank)
        self.domain = tuple(domain) if domain is not None else band(N)
        self.codomain = tuple(codomain) if codomain is not None else band(N)
        self.matrix = np.asarray(matrix, dtype=complex)
        expected = (self.rank * len(self.codomain), self.rank * len(self.domain))
        if self.matrix.shape != expected:
            raise StructuralError(
                "Kernel matrix has shape {}, expected {}".format(self.matrix.shape, expected)
            )
        if not np.isfinite(self.matrix).all():
            raise ValidationError("Kernel has non-finite entries")
        self.codomain_projection = codomain_projection
        self.truncation = float(truncation)

    @classmethod
    def identity(cls, N, rank=1):
        return cls(N, np.eye(rank * (2 * N + 1)), rank=rank)

    @classmethod
    def zero(cls, N, rank=1):
        size = rank * (2 * N + 1)
        return cls(N, np.zeros((size, size)), rank=rank)

    @classmethod
    def diagonal(cls, N, values):
        return cls(N, np.diag(np.asarray(values, dtype=complex)))

    @classmethod
    def rank_one(cls, N, u, v):
        """The kernel u v*."""
        return cls(N, np.outer(u, np.conj(v)))

    @property
    def is_square(self):
        return self.domain == self.codomain

    @property
    def range_projection(self):
        if self.codomain_projection is None:
            return np.eye(self.matrix.shape[0])
        return self.codomain_projection

    def adjoint(self):
        return TruncatedKernel(
            self.N, self.matrix.conj().T, self.rank, self.codomain, self.domain
        )

    def __matmul__(self, other):
        return compose(self, other)

    def __add__(self, other):
        _check_same_shape(self, other)
        return TruncatedKernel(
            self.N, self.matrix + other.matrix, self.rank, self.domain, self.codomain
        )

    def __sub__(self, other):
        _check_same_shape(self, other)
        return TruncatedKernel(
            self.N, self.matrix - other.matrix, self.rank, self.domain, self.codomain
        )

    def __mul__(self, scalar):
        return TruncatedKernel(
            self.N, scalar * self.matrix, self.rank, self.domain, self.codomain
        )

    __rmul__ = __mul__

    def norm(self):
        return float(np.abs(self.matrix).max()) if self.matrix.size else 0.0

    def block(self, row_mode, column_mode):
        """The r x r block between two modes."""
        i = self.codomain.index(row_mode) * self.rank
        j = self.domain.index(column_mode) * self.rank
        return self.matrix[i : i + self.rank, j : j + self.rank]

    def __repr__(self):
        return "<TruncatedKernel N={} rank={} {}x{}>".format(
            self.N, self.rank, len(self.codomain), len(self.domain)
        )


def _check_same_shape(a, b):
    if (a.N, a.rank, a.domain, a.codomain) != (b.N, b.rank, b.domain, b.codomain):
        raise StructuralError("Kernels act between different mode sets")


def compose(a, b):
    if a.N != b.N or a.rank != b.rank:
        raise StructuralError(
            "Cannot compose kernels with cutoffs {} and {}".format(a.N, b.N)
        )
    if a.domain != b.codomain:
        raise StructuralError("Domain of the left factor is not the codomain of the right")
    return TruncatedKernel(
        a.N,
        a.matrix @ b.matrix,
        a.rank,
        b.domain,
        a.codomain,
        codomain_projection=a.codomain_projection,
        truncation=a.truncation + b.truncation,
    )


def mode_shift(N, n, rank=1):
    """Multiplication by e^{inθ} on the band; modes pushed past ±N are dropped."""
    size = 2 * N + 1
    shift = np.zeros((size, size))
    for k in range(-N, N + 1):
        if -N <= k + n <= N:
            shift[k + n + N, k + N] = 1.0
    return np.kron(shift, np.eye(rank))


def twisted_conjugate(a, n):
    """e^{inθ} a e^{-inθ'}: shifts the kernel by n modes along both indices.

    The Frobenius mass of the entries pushed out of the band is recorded on the result.
    """
    if abs(n) > a.N:
        raise ValidationError(
            "Shift by {} modes leaves the band of cutoff {}".format(n, a.N)
        )
    if not a.is_square or a.domain != band(a.N):
        raise StructuralError("Twisted conjugation acts on kernels of the full band")
    shift = mode_shift(a.N, n, a.rank)
    shifted = shift @ a.matrix @ shift.T
    kept = shift.T @ shift
    dropped = a.matrix - kept @ a.matrix @ kept
    return TruncatedKernel(
        a.N,
        shifted,
        a.rank,
        truncation=a.truncation + float(np.linalg.norm(dropped)),
    )


class Heisenberg:
    """Translations and multiplications by e^{inθ} on the truncated band.

    An element (φ, n, z) acts as z · M(n) T(φ); the group law is
    (φ1, n1, z1)(φ2, n2, z2) = (φ1 + φ2, n1 + n2, e^{i φ1 n2} z1 z2).
    """

    def __init__(self, N):
        if N < 1:
            raise ValidationError("The Heisenberg representation needs N >= 1")
        self.N = int(N)
        self.modes = np.arange(-N, N + 1)

    def translation(self, phi):
        return np.diag(np.exp(1j * self.modes * phi))

    def multiplication(self, n):
        return mode_shift(self.N, n).astype(complex)

    def element(self, phi, n, z=1.0):
        return z * self.multiplication(n) @ self.translation(phi)

    @staticmethod
    def product(g1, g2):
        phi1, n1, z1 = g1
        phi2, n2, z2 = g2
        return (phi1 + phi2, n1 + n2, np.exp(1j * phi1 * n2) * z1 * z2)

    def commutator(self, n, phi):
        T = self.translation(phi)
        M = self.multiplication(n)
        return T @ M @ T.conj().T @ M.T

    def interior(self, margin):
        """Index slice of the modes at least `margin` away from the band edges."""
        return slice(margin, 2 * self.N + 1 - margin)


def toeplitz(N, coefficients, rank=None):
    """Graded truncation of the Toeplitz operator with Laurent-polynomial symbol Σ a_j e^{ijθ}.

    Modes below zero carry the identity. Non-negative domain modes stop at N - j_max so every
    image stays in the band, and the codomain projection keeps exactly the non-negative modes
    whose images are not cut off by the band edge. Cokernels are therefore interior.

    Args:
        coefficients: dict j -> r x r matrix (or scalar), j_min <= 0 <= j_max
    """
    coefficients = {
        int(j): np.atleast_2d(np.asarray(value, dtype=complex))
        for j, value in coefficients.items()
    }
    if rank is None:
        rank = next(iter(coefficients.values())).shape[0]
    j_max = max(max(coefficients), 0)
    j_min = min(min(coefficients), 0)
    if j_max - j_min > N:
        raise ValidationError(
            "Symbol bandwidth {} does not fit cutoff {}".format(j_max - j_min, N)
        )
    negative = tuple(range(-N, 0))
    domain = negative + tuple(range(0, N - j_max + 1))
    codomain = band(N)
    matrix = np.zeros((rank * len(codomain), rank * len(domain)), dtype=complex)
    row = {m: i for i, m in enumerate(codomain)}
    for col, k in enumerate(domain):
        if k < 0:
            matrix[row[k] * rank : (row[k] + 1) * rank, col * rank : (col + 1) * rank] = np.eye(rank)
            continue
        for j, a in coefficients.items():
            m = k + j
            if 0 <= m <= N:
                matrix[row[m] * rank : (row[m] + 1) * rank, col * rank : (col + 1) * rank] += a
    interior = [m for m in codomain if m <= N - j_max + j_min]
    frame = [np.eye(len(codomain) * rank)[:, row[m] * rank : (row[m] + 1) * rank] for m in interior]
    u, s, _vh = np.linalg.svd(matrix, full_matrices=False)
    frame.append(u[:, s > 1e-12 * max(s.max(), 1.0)])
    q, singular, _ = np.linalg.svd(np.hstack(frame), full_matrices=False)
    basis = q[:, singular > 1e-10]
    projection = basis @ basis.conj().T
    logger.debug("Toeplitz truncation N=%s rank=%s: %s", N, rank, matrix.shape)
    return TruncatedKernel(N, matrix, rank, domain, codomain, codomain_projection=projection)


def toeplitz_winding(N, k):
    """Toeplitz operator of the scalar symbol e^{ikθ}."""
    return toeplitz(N, {k: 1.0}, rank=1)


def bott_projector(x):
    """(1 + x·σ) / 2 for a unit vector x."""
    sigma = (
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]], dtype=complex),
        np.array([[1, 0], [0, -1]], dtype=complex),
    )
    return 0.5 * (np.eye(2) + sum(c * s for c, s in zip(x, sigma)))


def bott_symbol(x):
    """Clutching symbol e^{iθ} p(x) + (1 - p(x)) as Laurent coefficients."""
    p = bott_projector(x)
    return {0: np.eye(2) - p, 1: p}


class Parametrix:
    """Moore–Penrose parametrix with the projections S0 = 1 - QP and S1 = R - PQ."""

    def __init__(self, P, Q, S0, S1, condition):
        self.P = P
        self.Q = Q
        self.S0 = S0
        self.S1 = S1
        self.condition = condition
        self.ill_conditioned = condition > CONDITION_LIMIT

    @property
    def kernel_dimension(self):
        return int(round(np.trace(self.S0).real))

    @property
    def cokernel_dimension(self):
        return int(round(np.trace(self.S1).real))

    @property
    def index(self):
        return self.kernel_dimension - self.cokernel_dimension


def parametrix(P, tolerance=1e-14):
    """Moore–Penrose parametrix; singular values at or below `tolerance` count as kernel."""
    matrix = P.matrix
    singular = np.linalg.svd(matrix, compute_uv=False)
    largest = singular.max() if singular.size else 0.0
    nonzero = singular[singular > tolerance]
    condition = float(nonzero.max() / nonzero.min()) if nonzero.size else 1.0
    if condition > CONDITION_LIMIT:
        logger.warning("Parametrix of an ill-conditioned kernel: condition %.3e", condition)
    Q = np.linalg.pinv(matrix, rcond=tolerance / largest if largest else 1.0)
    S0 = np.eye(matrix.shape[1]) - Q @ matrix
    S1 = P.range_projection - matrix @ Q
    return Parametrix(P, Q, S0, S1, condition)


class IndexData:
    """E1 = [[1 - S0², Q(S1 + S1²)], [S1 P, S1²]] and E0 = [[1, 0], [0, 0]]."""

    def __init__(self, E0, E1, idempotency_residual, domain_size):
        self.E0 = E0
        self.E1 = E1
        self.idempotency_residual = idempotency_residual
        self.domain_size = domain_size

    @property
    def trace(self):
        return float(np.trace(self.E1 - self.E0).real)

    def as_dict(self):
        return {
            "idempotency_residual": self.idempotency_residual,
            "trace": self.trace,
            "trace_integer": int(round(self.trace)),
        }


def index_idempotent(P, Q, S0, S1):
    """The idempotent pair (E1, E0) whose trace difference is -index(P) = rank S1 - rank S0.

    A near-idempotent E1 is polished by McWeeny steps until E1² - E1 is below POLISH_TARGET.
    """
    matrix = P.matrix if isinstance(P, TruncatedKernel) else np.asarray(P)
    n = matrix.shape[1]
    m = matrix.shape[0]
    E1 = np.block(
        [
            [np.eye(n) - S0 @ S0, Q @ (S1 + S1 @ S1)],
            [S1 @ matrix, S1 @ S1],
        ]
    )
    E0 = np.zeros((n + m, n + m), dtype=complex)
    E0[:n, :n] = np.eye(n)
    residual = float(np.abs(E1 @ E1 - E1).max())
    if residual > IDEMPOTENCY_TOLERANCE:
        raise ComputationError(
            "E1 is not idempotent: residual {:.3e}".format(residual)
        )
    for _ in range(POLISH_STEPS):
        if residual <= POLISH_TARGET:
            break
        square = E1 @ E1
        E1 = 3 * square - 2 * square @ E1
        residual = float(np.abs(E1 @ E1 - E1).max())
    return IndexData(E0, E1, residual, n)


def analytic_index(P):
    """Parametrix and index idempotents of one fiber operator."""
    R = parametrix(P)
    return R, index_idempotent(P, R.Q, R.S0, R.S1)


class OperatorFamily:
    """Fiber operators over the vertices of a base mesh.

    Attributes:
        mesh (Mesh or None): base mesh; None for a point base
        kernels (list): TruncatedKernel per base vertex in its preferred chart
        chart_kernels (dict): chart name -> list of kernels in that chart (None off the patch)
        transitions (dict): (source, target) -> callable(vertex, kernel) moving a kernel
            between charts
        deck_shift (int): winding w of u, the mode shift applied across the cut of its lift
        symbol (list or None): Laurent coefficients per vertex when built from symbol data
    """

    def __init__(
        self,
        mesh,
        kernels,
        chart_kernels=None,
        transitions=None,
        deck_shift=0,
        symbol=None,
        label="",
    ):
        self.mesh = mesh
        self.kernels = list(kernels)
        self.chart_kernels = chart_kernels or {"N": list(self.kernels)}
        self.transitions = transitions or {}
        self.deck_shift = int(deck_shift)
        self.symbol = symbol
        self.label = label

    def __len__(self):
        return len(self.kernels)

    def overlap_residual(self):
        """max ‖conj_jk(K_j) - K_k‖ over the vertices both charts contain."""
        residual = 0.0
        for (source, target), forward in self.transitions.items():
            there = self.chart_kernels[target]
            for vertex, kernel in enumerate(self.chart_kernels[source]):
                if kernel is None or there[vertex] is None:
                    continue
                residual = max(residual, (forward(vertex, kernel) - there[vertex]).norm())
        return residual

    def index_data(self):
        return [analytic_index(kernel) for kernel in self.kernels]

    def __repr__(self):
        return "<OperatorFamily {} samples={}>".format(self.label, len(self.kernels))


def chart_rotation(N, rank, lift):
    """Kernel map of the fiber rotation by the transition lift: conjugation by e^{2πi θ_NS k}."""

    def forward(vertex, kernel):
        phases = np.exp(2j * np.pi * lift[vertex] * np.arange(-N, N + 1))
        U = np.kron(np.diag(phases), np.eye(rank))
        return TruncatedKernel(
            N, U @ kernel.matrix @ U.conj().T, rank, kernel.domain, kernel.codomain
        )

    return forward


def smoothing_profile(xi, scale=1.0):
    return np.exp(-((xi / scale) ** 2))


def _diagonal_invertibles(mesh, lift, N, amplitude, scale):
    positions = mesh.vertex_positions()
    modes = np.arange(-N, N + 1)
    kernels = []
    for vertex in range(mesh.count(0)):
        c = complex(positions[vertex, -3], positions[vertex, -1]) if mesh.axes > 1 else 1.0
        entries = np.exp(amplitude * c * smoothing_profile(modes - lift[vertex], scale))
        kernels.append(TruncatedKernel.diagonal(N, entries))
    return kernels


def twisted_invertible_family(J, N, amplitude=0.5, scale=2.0):
    """Mode-diagonal invertibles 1 + a(x, k - f(x)) over the base of a primitive bundle.

    1 + a = exp(amplitude · c(x) · e^{-ξ²/scale²}) with c(x) read from the sphere coordinates,
    so every entry is invertible and a is Schwartz in ξ = k - f. Moving f by a deck shift is the
    twisted conjugation of the kernels by the same number of modes.
    """
    mesh = J.total.mesh
    lift = J.u.lift.component(0)
    kernels = _diagonal_invertibles(mesh, lift, N, amplitude, scale)
    L = J.total.base_bundle
    in_chart = {
        p.name: [kernels[v] if p.masks[0][v] else None for v in range(mesh.count(0))]
        for p in L.patches
    }
    transitions = {}
    if len(L.patches) == 2:
        transitions[("N", "S")] = chart_rotation(N, 1, np.nan_to_num(L.transition))
    return OperatorFamily(
        mesh,
        kernels,
        chart_kernels=in_chart,
        transitions=transitions,
        deck_shift=J.u.winding,
        label="twisted-invertible",
    )


def deck_residual(J, N, shift=1, amplitude=0.5, scale=2.0):
    """max over vertices of the interior gap between the family built from f + shift and the
    twisted conjugation of the family built from f."""
    mesh = J.total.mesh
    lift = J.u.lift.component(0)
    original = _diagonal_invertibles(mesh, lift, N, amplitude, scale)
    moved = _diagonal_invertibles(mesh, lift + shift, N, amplitude, scale)
    inner = slice(abs(shift), 2 * N + 1 - abs(shift))
    residual = 0.0
    for before, after in zip(original, moved):
        gap = twisted_conjugate(before, shift).matrix - after.matrix
        residual = max(residual, float(np.abs(gap[inner, inner]).max()))
    return residual


def _sphere_positions(mesh):
    kinds = [f.kind for f in mesh.factors]
    if "sphere" not in kinds:
        raise ValidationError("The Bott family needs a sphere factor")
    o = mesh.offsets[kinds.index("sphere")]
    return mesh.vertex_positions()[:, o : o + 3]


def build_projective_family(scenario, mesh=None, J=None):
    """Operator family of a scenario.

    `family` selects the Toeplitz operator of winding `symbol_winding` over a point
    ("toeplitz"), the Bott clutching family over a sphere ("bott"), or the twisted family of
    mode-diagonal invertibles over S¹ x S² ("twisted").
    """
    N = scenario.N
    family = getattr(scenario, "family", "toeplitz")
    if family == "bott":
        if mesh is None:
            raise ValidationError("The Bott family needs a sphere mesh")
        symbols = [bott_symbol(x) for x in _sphere_positions(mesh)]
        kernels = [toeplitz(N, s) for s in symbols]
        return OperatorFamily(mesh, kernels, symbol=symbols, label="bott")
    if family == "twisted":
        if J is None:
            raise ValidationError("The twisted family needs a primitive bundle")
        if scenario.symbol_winding:
            raise ValidationError(
                "A non-zero twist admits only rank-zero index classes; use symbol_winding 0",
                scenario=getattr(scenario, "name", None),
            )
        family = twisted_invertible_family(J, N)
        family.symbol = [{0: np.eye(1)} for _ in family.kernels]
        return family
    if family != "toeplitz":
        raise ValidationError("Unknown operator family {!r}".format(family))
    kernel = toeplitz_winding(N, scenario.symbol_winding)
    return OperatorFamily(
        None, [kernel], symbol=[{scenario.symbol_winding: np.eye(1)}], label="toeplitz"
    )


def symbol_of(P, margin=None):
    """Band-edge Laurent coefficients of every kernel of a family.

    Returns:
        list of (plus, minus) per sample, each a dict j -> r x r matrix read off the column of
        one mode `margin` away from the top (plus) and bottom (minus) band edge.
    """
    table = []
    for kernel in P.kernels:
        width = margin if margin is not None else max(2, kernel.N // 4)
        nonnegative = [k for k in kernel.domain if k >= 0]
        top = nonnegative[-min(width, len(nonnegative))]
        bottom = kernel.domain[min(width, len(kernel.domain) - 1)]
        limits = []
        for column_mode in (top, bottom):
            coefficients = {}
            for row_mode in kernel.codomain:
                block = kernel.block(row_mode, column_mode)
                if np.abs(block).max() > 1e-14:
                    coefficients[row_mode - column_mode] = block.copy()
            limits.append(coefficients)
        table.append(tuple(limits))
    return table


def evaluate_symbol(coefficients, theta):
    """Σ_j a_j e^{ijθ} on an array of angles; returns shape (len(theta), r, r)."""
    theta = np.asarray(theta)
    values = None
    for j, a in coefficients.items():
        term = np.exp(1j * j * theta)[:, None, None] * np.atleast_2d(a)[None, :, :]
        values = term if values is None else values + term
    return values
