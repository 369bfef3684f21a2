"""Twisted de Rham complex d + δ̄∧ on a base mesh, and its pullback to the circle bundle.

δ̄ = ᾱ ∧ β̄ with both factors integral: no 1/2πi normalization is applied anywhere, and the
reports repeat this convention.
"""
import logging

import numpy as np
from scipy import sparse

from tkindex.bundlegeom import InvariantForm
from tkindex.forms import (
    DiscreteForm,
    circle_length_form,
    fundamental_chain,
    solid_angle_form,
    wedge_matrix,
)
from tkindex.utils import StructuralError, ValidationError, convergence_verdict


logger = logging.getLogger(__name__)

TWIST_NORMALIZATION = "delta_bar = alpha_bar ^ beta_bar, both with integral periods"
KERNEL_THRESHOLD = 1e-6
MIN_GAP_RATIO = 10.0
PERIOD_TOLERANCE = 1e-6


class TwistData:
    """Closed 3-form δ̄ on a base mesh.

    Attributes:
        delta_bar (DiscreteForm): pure degree 3
        closedness_residual (float): ‖dδ̄‖
        period (float): ∫ δ̄ over the fundamental cycle (0 on meshes of other dimension)
    """

    def __init__(self, delta_bar):
        if set(delta_bar.degrees) - {3}:
            raise StructuralError("A twist is a pure 3-form, got degrees {}".format(delta_bar.degrees))
        self.delta_bar = delta_bar
        self.mesh = delta_bar.mesh
        self.closedness_residual = delta_bar.d().norm()
        self.period = (
            float(fundamental_chain(self.mesh).integrate(delta_bar))
            if self.mesh.dimension == 3
            else 0.0
        )
        if abs(self.period - round(self.period)) > PERIOD_TOLERANCE:
            raise ValidationError("Twist period {} is not an integer".format(self.period))

    @classmethod
    def zero(cls, mesh):
        return cls(DiscreteForm.zero(mesh))

    @classmethod
    def decomposable(cls, alpha_bar, beta_bar):
        return cls(alpha_bar.wedge(beta_bar).restrict([3]))

    @classmethod
    def for_product(cls, mesh, winding, degree):
        """ᾱ ∧ β̄ for the winding-w map and the degree-k bundle on a circle x sphere mesh."""
        factors = [f.kind for f in mesh.factors]
        if factors != ["circle", "sphere"]:
            if winding or degree:
                raise ValidationError("A decomposable twist needs a circle x sphere mesh")
            return cls.zero(mesh)
        return cls.decomposable(
            circle_length_form(mesh, 0, scale=winding),
            solid_angle_form(mesh, 1, scale=degree),
        )

    def perturbed(self, eta):
        """δ̄ + dη for a 2-form η; the twisted cohomology does not change."""
        return TwistData(self.delta_bar + eta.restrict([2]).d())

    def __repr__(self):
        return "<TwistData period={:.6g} on {!r}>".format(self.period, self.mesh)


def twisted_d(v, t):
    if not v.mesh.same_as(t.mesh):
        raise StructuralError(
            "Form on {!r} cannot be twisted by data on {!r}".format(v.mesh, t.mesh)
        )
    return v.d() + t.delta_bar.wedge(v)


def _parity_degrees(mesh, parity):
    return [k for k in range(mesh.dimension + 1) if k % 2 == parity]


def twisted_operator(mesh, t, parity):
    """Sparse block matrix of d + δ̄∧ from the forms of one parity to the other."""
    sources = _parity_degrees(mesh, parity)
    targets = _parity_degrees(mesh, 1 - parity)
    delta = t.delta_bar.component(3) if 3 in t.delta_bar.degrees else None
    blocks = []
    for j in targets:
        row = []
        for k in sources:
            if j == k + 1:
                row.append(mesh.d_matrix(k))
            elif j == k + 3 and delta is not None:
                row.append(wedge_matrix(mesh, delta, 3, k))
            else:
                row.append(sparse.csr_matrix((mesh.count(j), mesh.count(k))))
        blocks.append(row)
    matrix = sparse.bmat(blocks, format="csr")
    logger.debug("Twisted operator of parity %s on %r: %s", parity, mesh, matrix.shape)
    return matrix


class TwistedHodgeResult:
    """Kernel dimensions of the twisted Hodge Laplacians with their spectral audit trail."""

    def __init__(self, even_dim, odd_dim, gap_ratios, flagged, spectra):
        self.even_dim = even_dim
        self.odd_dim = odd_dim
        self.gap_ratios = gap_ratios
        self.flagged = flagged
        self.spectra = spectra

    @property
    def dims(self):
        return (self.even_dim, self.odd_dim)

    def as_dict(self):
        return {
            "even_dim": self.even_dim,
            "odd_dim": self.odd_dim,
            "gap_ratio_even": self.gap_ratios[0],
            "gap_ratio_odd": self.gap_ratios[1],
            "flagged": self.flagged,
            "normalization": TWIST_NORMALIZATION,
        }


def _kernel_dimension(laplacian):
    eigenvalues = np.linalg.eigvalsh(laplacian.toarray())
    singular = np.sqrt(np.clip(eigenvalues, 0.0, None))
    largest = singular.max() if singular.size else 0.0
    if largest == 0.0:
        return singular.size, float("inf"), singular
    zero = singular < KERNEL_THRESHOLD * largest
    if not zero.any() or zero.all():
        return int(zero.sum()), float("inf"), singular
    gap = singular[~zero].min() / max(singular[zero].max(), np.finfo(float).tiny)
    return int(zero.sum()), float(gap), singular


def twisted_hodge(mesh, t):
    even = twisted_operator(mesh, t, 0)
    odd = twisted_operator(mesh, t, 1)
    laplacians = (
        (even.T @ even + odd @ odd.T),
        (odd.T @ odd + even @ even.T),
    )
    dims, gaps, spectra = [], [], []
    for laplacian in laplacians:
        dim, gap, singular = _kernel_dimension(laplacian)
        dims.append(dim)
        gaps.append(gap)
        spectra.append(singular)
    flagged = any(gap < MIN_GAP_RATIO for gap in gaps)
    if flagged:
        logger.warning(
            "Ambiguous spectral gap on %r: ratios %s (required %s)", mesh, gaps, MIN_GAP_RATIO
        )
    logger.info("Twisted cohomology on %r: even %s, odd %s", mesh, dims[0], dims[1])
    return TwistedHodgeResult(dims[0], dims[1], gaps, flagged, spectra)


def twisted_cohomology_dims(m, t):
    return twisted_hodge(m, t).dims


def subcomplex_map(v, tot, alpha_bar):
    """ṽ = p*v - γ ∧ p*(ᾱ ∧ v), the image of v in the invariant forms on the circle bundle."""
    if not v.mesh.same_as(tot.mesh):
        raise StructuralError("Form does not live on the base of the circle bundle")
    return InvariantForm(
        tot.mesh, 1, {(): v, (1,): -1 * alpha_bar.wedge(v)}, tot.curvature
    )


def subcomplex_conditions(v, tot, alpha_bar):
    """Residuals of L_∂θ ṽ = 0 and ι_∂θ ṽ = -ᾱ ∧ ṽ."""
    image = subcomplex_map(v, tot, alpha_bar)
    contraction = image.contract(1) + tot.base_form(alpha_bar).wedge(image)
    return {
        "lie": image.lie(1).norm(),
        "contraction": contraction.norm(),
    }


def conjugation_check(v, tot, alpha_bar, t):
    """‖d ṽ - (d v + δ̄ ∧ v)~‖, the defect of d conjugating to the twisted differential."""
    left = subcomplex_map(v, tot, alpha_bar).d()
    right = subcomplex_map(twisted_d(v, t), tot, alpha_bar)
    return (left - right).scaled_norm()


def injectivity_ratio(v1, v2, tot, alpha_bar):
    """‖ṽ1 - ṽ2‖ / ‖v1 - v2‖; at least one since ṽ keeps v as its basic part."""
    separation = (v1 - v2).norm()
    if separation == 0:
        raise ValidationError("Inputs coincide")
    images = subcomplex_map(v1, tot, alpha_bar) - subcomplex_map(v2, tot, alpha_bar)
    return images.norm() / separation


def conjugation_study(forms_at, resolutions):
    """Refinement study of the conjugation defect.

    Args:
        forms_at: callable r -> (v, tot, alpha_bar, t)
        resolutions: refinement levels
    """
    steps, residuals = [], []
    for r in resolutions:
        v, tot, alpha_bar, t = forms_at(r)
        residuals.append(conjugation_check(v, tot, alpha_bar, t))
        steps.append(v.mesh.spacing)
    return convergence_verdict(steps, residuals, min_slope=1.5, floor=1e-10)


def _form_parity(v):
    parities = {k % 2 for k in v.degrees}
    if len(parities) > 1:
        raise ValidationError("Form mixes parities: degrees {}".format(v.degrees))
    return parities.pop() if parities else 0


def twisted_harmonic_basis(mesh, t, parity):
    """Orthonormal columns spanning the twisted-harmonic forms of one parity.

    Rows follow DiscreteForm.flatten over the degrees of that parity.
    """
    if not mesh.same_as(t.mesh):
        raise StructuralError("Form and twist live on different meshes")
    forward = twisted_operator(mesh, t, parity)
    backward = twisted_operator(mesh, t, 1 - parity)
    laplacian = (forward.T @ forward + backward @ backward.T).toarray()
    eigenvalues, vectors = np.linalg.eigh(laplacian)
    largest = max(abs(eigenvalues).max(initial=0.0), np.finfo(float).tiny)
    return vectors[:, eigenvalues < KERNEL_THRESHOLD ** 2 * largest]


def twisted_harmonic_pairings(v, t, basis=None, parity=None):
    """Pairings of v with an orthonormal basis of the twisted-harmonic forms of its parity.

    Forms paired against the same basis agree in twisted cohomology exactly when their
    pairings agree.
    """
    parity = _form_parity(v) if parity is None else parity
    if v.degrees and _form_parity(v) != parity:
        raise ValidationError("Form of degrees {} has the wrong parity".format(v.degrees))
    if basis is None:
        basis = twisted_harmonic_basis(v.mesh, t, parity)
    return basis.conj().T @ v.flatten(_parity_degrees(v.mesh, parity))


def twisted_harmonic_projection(v, t):
    """Norm of the projection of v onto the twisted-harmonic forms of its parity.

    A form that is exact up to (d + δ̄∧) of something projects to zero.
    """
    return float(np.linalg.norm(twisted_harmonic_pairings(v, t)))
