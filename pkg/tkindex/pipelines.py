"""Verification pipelines behind the command line subcommands.

Every pipeline takes a ScenarioConfig and returns (results, residuals, passes); `run` wraps
them into a Report and `sweep` repeats one over a parameter.
"""
import concurrent.futures
import logging
import time
from fractions import Fraction

import numpy as np

from tkindex import cech, sclquant
from tkindex.bundlegeom import (
    HermitianLineBundle,
    MeshCircleMap,
    build_circle_bundle,
    build_primitive_bundle,
    catalog_mesh,
    check_primitivity,
    curvature_study,
    find_factor,
)
from tkindex.cherncalc import (
    ConnectionData,
    even_chern,
    grr_check,
    index_bundle_character,
    index_family,
    index_in_cohomology,
    odd_chern,
    overlap_gauge_residual,
    relative_symbol_chern,
)
from tkindex.fiberops import (
    TruncatedKernel,
    analytic_index,
    build_projective_family,
    index_idempotent,
    parametrix,
)
from tkindex.forms import random_trigonometric_form, sphere_cycle
from tkindex.reports import Report
from tkindex.twistedderham import (
    TwistData,
    twisted_harmonic_basis,
    twisted_harmonic_pairings,
    twisted_hodge,
)
from tkindex.utils import (
    ValidationError,
    convergence_verdict,
    fit_loglog_slope,
)


logger = logging.getLogger(__name__)

# Betti numbers of the catalog manifolds
EXPECTED_BETTI = {
    cech.ManifoldTag.POINT: (1,),
    cech.ManifoldTag.CIRCLE: (1, 1),
    cech.ManifoldTag.SPHERE2: (1, 0, 1),
    cech.ManifoldTag.TORUS2: (1, 2, 1),
    cech.ManifoldTag.CIRCLE_TIMES_SPHERE2: (1, 1, 1, 1),
    cech.ManifoldTag.TORUS3: (1, 3, 3, 1),
}

SWEEP_PARAMETERS = ("resolution", "N", "eps")
MIN_SWEEP_VALUES = 3
# residual columns of a sweep that carry a convergence requirement, by minimum slope tolerance
SWEEP_SLOPES = {
    "curvature_split": "curvature_slope",
    "dmu_twist": "curvature_slope",
    "closedness": "curvature_slope",
    "subcomplex": "curvature_slope",
    "composition": "defect_slope",
}
# integer result columns that must not move along a sweep
STABLE_COLUMNS = ("index", "even_dim", "odd_dim", "trace_integer", "class_coordinate")
# dense eigensolves of the twisted Laplacians stop at this resolution
MAX_SPECTRAL_RESOLUTION = 1

# sign and normalization choices echoed in reports where they affect the values
CONVENTIONS = {
    "dd_cocycle": "d_ijk = -n_ij theta_jk",
    "shift_character": "s = theta_1 - theta_2 mod 1",
    "twist": "delta = alpha_bar ^ beta_bar, both integral",
    "odd_character": "degree 2k+1 scaled by (-1)^k (2 pi i)^-(k+1)",
    "index_sign": "(-1)^n with n the vertical cotangent dimension 2",
}


class Pipeline:
    def __init__(self, name, func, tolerances, help):
        self.name = name
        self.func = func
        self.tolerances = tuple(tolerances)
        self.help = help


class PipelineRegistry:
    def __init__(self):
        self.pipelines = {}

    def register(self, name, tolerances=(), help=""):
        def decorator(func):
            self.pipelines[name] = Pipeline(name, func, tolerances, help or func.__doc__)
            return func

        return decorator

    def get(self, name):
        try:
            return self.pipelines[name]
        except KeyError:
            raise ValidationError(
                "Unknown subcommand {!r}; expected one of {}".format(name, sorted(self.pipelines))
            )

    def __iter__(self):
        return iter(self.pipelines.values())


pipeline_registry = PipelineRegistry()


def _conventions(*names):
    return {name: CONVENTIONS[name] for name in names}


def _integer_gap(value):
    return abs(float(value) - round(float(value)))


def _primitive_bundle(config, mesh, resolution):
    L = HermitianLineBundle(mesh, config.bundle_degree)
    t = build_circle_bundle(L, config.fiber_points * 2 ** resolution)
    return build_primitive_bundle(MeshCircleMap(mesh, config.u_winding), t)


def _operator_family(config, resolution):
    """(family, base mesh, primitive bundle) of the scenario's operator family."""
    if config.family == "toeplitz":
        return build_projective_family(config), None, None
    mesh = catalog_mesh(config.manifold, resolution)
    if config.family == "bott":
        return build_projective_family(config, mesh=mesh), mesh, None
    J = _primitive_bundle(config, mesh, resolution)
    return build_projective_family(config, J=J), mesh, J


def _real_betti(nerve):
    return tuple(
        cech.cohomology(nerve, k, cech.CoefficientGroup.REAL).free_rank
        for k in range(nerve.dimension + 1)
    )


@pipeline_registry.register("cech-h", help="Integer Čech cohomology of the catalog nerve")
def cech_h(config):
    nerve = cech.nerve_catalog(config.manifold)
    groups = [cech.cohomology(nerve, k) for k in range(nerve.dimension + 1)]
    betti = tuple(group.free_rank for group in groups)
    results = {
        "nerve": {"vertices": nerve.vertex_count, "dimension": nerve.dimension},
        "cohomology": {
            "H{}".format(k): {"free_rank": group.free_rank, "torsion": group.torsion}
            for k, group in enumerate(groups)
        },
        "betti": list(betti),
    }
    passes = {
        "betti": betti == EXPECTED_BETTI[config.manifold],
        "torsion_free": not any(group.torsion for group in groups),
        "real_ranks": _real_betti(nerve) == betti,
    }
    return results, {}, passes


def _study_pass(config, verdict):
    """Slope verdict of a study over three or more resolutions, otherwise the single-run bound."""
    if len(verdict["residuals"]) >= MIN_SWEEP_VALUES:
        return verdict["passed"], verdict["slope"]
    return max(verdict["residuals"]) <= config.tolerance("residual"), None


def _slope_or_bound(config, steps, values, slope_tolerance):
    verdict = convergence_verdict(
        steps, values, config.tolerance(slope_tolerance), config.tolerance("exact")
    )
    return _study_pass(config, verdict)


@pipeline_registry.register(
    "dd-class",
    tolerances=("exact", "residual", "curvature_slope"),
    help="Dixmier–Douady class of the decomposable twist and its de Rham representative",
)
def dd_class(config):
    data = cech.decomposable_twist_data(config.manifold, config.u_winding, config.bundle_degree)
    nerve = data["nerve"]
    if nerve.dimension < 3 or data["u"] is None or data["c"] is None:
        raise ValidationError(
            "The Dixmier–Douady class needs a three-dimensional base with u and L",
            scenario=config.name,
        )
    d = cech.dd_cocycle(data["u"], data["c"], nerve)
    delta = cech.bockstein(d, nerve)
    expected = cech.cup(data["alpha"], data["beta"], nerve)
    coordinates = cech.class_coordinates(delta, nerve)
    cup_coordinates = cech.class_coordinates(expected, nerve)
    results = {
        "class_coordinates": list(coordinates),
        "cup_coordinates": list(cup_coordinates),
        "class_coordinate": coordinates[0] if len(coordinates) == 1 else None,
        "conventions": _conventions("dd_cocycle", "shift_character"),
    }
    residuals = {}
    passes = {
        "bockstein_equals_cup": coordinates == cup_coordinates,
        "class_magnitude": [abs(c) for c in coordinates]
        == [abs(config.u_winding * config.bundle_degree)] * len(coordinates),
    }

    if config.manifold is not cech.ManifoldTag.CIRCLE_TIMES_SPHERE2:
        return results, residuals, passes

    bundles = []
    transition_defect = associativity_defect = Fraction(0)
    connection_defect = 0.0
    for r in config.resolutions:
        J = _primitive_bundle(config, catalog_mesh(config.manifold, r), r)
        primitivity = check_primitivity(J, seed=config.seed)
        transition_defect = max(transition_defect, primitivity["transition_defect"])
        associativity_defect = max(associativity_defect, primitivity["associativity_defect"])
        connection_defect = max(connection_defect, primitivity["connection_defect"])
        bundles.append(J)
    study = curvature_study(
        bundles, config.tolerance("curvature_slope"), config.tolerance("exact")
    )
    finest = study["checks"][-1]
    results.update(
        {
            "transition_defect": transition_defect,
            "associativity_defect": associativity_defect,
            "steps": study["steps"],
        }
    )
    residuals.update(
        {
            "connection_defect": connection_defect,
            "fiber_product_period_defect": max(
                c.get("fiber_product_period_defect", 0.0) for c in study["checks"]
            ),
            "curvature_split": finest["curvature_split"],
            "dmu_twist": finest["dmu_twist"],
        }
    )
    passes.update(
        {
            "transition_defect": transition_defect == 0,
            "associativity_defect": associativity_defect == 0,
            "connection_defect": connection_defect <= config.tolerance("exact"),
        }
    )
    for name, verdict in study["verdicts"].items():
        passes[name], results["{}_slope".format(name)] = _study_pass(config, verdict)
    return results, residuals, passes


def _expected_twisted_dims(config, twist):
    betti = _real_betti(cech.nerve_catalog(config.manifold))
    even = sum(b for k, b in enumerate(betti) if k % 2 == 0)
    odd = sum(b for k, b in enumerate(betti) if k % 2 == 1)
    if round(twist.period):
        # δ̄∧ pairs H^0 with H^3 and kills both
        even, odd = even - 1, odd - 1
    return even, odd


@pipeline_registry.register(
    "twisted-derham", help="Kernel dimensions of the twisted Hodge Laplacians"
)
def twisted_derham(config):
    resolutions = sorted({min(r, MAX_SPECTRAL_RESOLUTION) for r in config.resolutions})
    if resolutions[-1] < config.resolution:
        logger.info(
            "Twisted Hodge dimensions of %s computed up to resolution %s",
            config.name,
            resolutions[-1],
        )
    per_resolution, dims = [], []
    for r in resolutions:
        mesh = catalog_mesh(config.manifold, r)
        twist = TwistData.for_product(mesh, config.u_winding, config.bundle_degree)
        hodge = twisted_hodge(mesh, twist)
        per_resolution.append(dict(hodge.as_dict(), resolution=r, period=round(twist.period)))
        dims.append(hodge.dims)
    expected = _expected_twisted_dims(config, twist)
    eta = random_trigonometric_form(mesh, [2], np.random.default_rng(config.seed))
    perturbed = twisted_hodge(mesh, twist.perturbed(eta)).dims
    results = {
        "even_dim": dims[-1][0],
        "odd_dim": dims[-1][1],
        "expected": list(expected),
        "perturbed": list(perturbed),
        "resolutions": per_resolution,
        "spectral_resolution": resolutions[-1],
        "conventions": _conventions("twist"),
    }
    residuals = {"twist_closedness": twist.closedness_residual}
    passes = {
        "dimensions": all(d == expected for d in dims),
        "stable": len(dims) < 2 or dims[-1] == dims[-2],
        "exact_perturbation": perturbed == dims[-1],
    }
    return results, residuals, passes


def _random_operator(rng):
    m, n = (int(v) for v in rng.integers(3, 9, size=2))
    matrix = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
    return TruncatedKernel(0, matrix, domain=tuple(range(n)), codomain=tuple(range(m)))


def _expected_trace(config):
    return {"toeplitz": config.symbol_winding, "bott": 1, "twisted": 0}[config.family]


@pipeline_registry.register(
    "family-index",
    tolerances=("idempotency", "integer"),
    help="Index idempotents of the operator family and of random rectangular operators",
)
def family_index(config):
    family, _mesh, _J = _operator_family(config, config.resolution)
    data = [d for _R, d in family.index_data()]
    traces = np.array([d.trace for d in data])
    idempotency = max(d.idempotency_residual for d in data)
    integer_gap = max(_integer_gap(t) for t in traces)

    random_residual, random_gap = 0.0, 0.0
    for seed in range(config.seed, config.seed + config.samples):
        P = _random_operator(np.random.default_rng(seed))
        R = parametrix(P)
        d = index_idempotent(P, R.Q, R.S0, R.S1)
        random_residual = max(random_residual, d.idempotency_residual)
        m, n = P.matrix.shape
        random_gap = max(random_gap, abs(d.trace - (m - n)))

    trace_integer = int(round(traces[0]))
    results = {
        "members": len(data),
        "trace": float(traces[0]),
        "trace_integer": trace_integer,
        "expected_trace": _expected_trace(config),
        "random_samples": config.samples,
    }
    if len(family) == 1:
        R, _d = analytic_index(family.kernels[0])
        results.update(
            {
                "index": R.index,
                "kernel_dimension": R.kernel_dimension,
                "cokernel_dimension": R.cokernel_dimension,
            }
        )
    residuals = {
        "idempotency": idempotency,
        "integer_gap": integer_gap,
        "trace_spread": float(np.ptp(traces)),
        "random_idempotency": random_residual,
        "random_trace_gap": random_gap,
    }
    passes = {
        "idempotency": idempotency <= config.tolerance("idempotency"),
        "integer": integer_gap <= config.tolerance("integer"),
        "constant": residuals["trace_spread"] <= config.tolerance("integer"),
        "expected_trace": abs(trace_integer) == abs(_expected_trace(config)),
        "random_idempotency": random_residual <= config.tolerance("idempotency"),
        "random_trace": random_gap <= config.tolerance("integer"),
    }
    return results, residuals, passes


def _compare_point(config, family):
    _R, data = analytic_index(family.kernels[0])
    rel = relative_symbol_chern(family.symbol, fiber_points=config.fiber_points)
    topological = index_in_cohomology(rel, config)
    riesz = index_bundle_character(rel)
    results = {
        "analytic_degree0": data.trace,
        "topological_degree0": topological.degree0,
        "index_bundle_degree0": riesz.degree0,
        "fiber_pairing": rel.fiber_pairing(),
        "conventions": _conventions("odd_character", "index_sign"),
    }
    residuals = {
        "degree0_gap": abs(data.trace - topological.degree0),
        "fiber_pairing_gap": abs(rel.fiber_pairing() - config.symbol_winding),
    }
    passes = {
        "degree0": residuals["degree0_gap"] <= config.tolerance("integer"),
        "index_bundle": riesz.degree0 == topological.degree0,
        "fiber_pairing": residuals["fiber_pairing_gap"] <= config.tolerance("pairing"),
    }
    return results, residuals, passes


def _compare_sphere(config, family, mesh):
    E1, E0 = index_family(family)
    analytic = even_chern(E1, E0)
    rel = relative_symbol_chern(family.symbol, base=mesh, fiber_points=config.fiber_points)
    topological = index_in_cohomology(rel, config)
    riesz = index_bundle_character(rel)
    cycle = sphere_cycle(mesh, find_factor(mesh, "sphere"))
    a, t, b = analytic.pairing(cycle), topological.pairing(cycle), riesz.pairing(cycle)
    results = {
        "analytic_degree0": analytic.degree0,
        "topological_degree0": topological.degree0,
        "analytic_pairing": a,
        "topological_pairing": t,
        "index_bundle_pairing": b,
        "fiber_pairing": rel.fiber_pairing(),
        "conventions": _conventions("odd_character", "index_sign"),
    }
    residuals = {
        "pairing_gap": abs(a - t),
        "index_bundle_gap": abs(b - t),
        "integer_gap": _integer_gap(a),
        "cocycle": rel.cocycle_residual,
        "topological_closedness": topological.closedness_residual,
    }
    passes = {
        "degree0": analytic.degree0 == topological.degree0 == riesz.degree0,
        "pairing": residuals["pairing_gap"] <= config.tolerance("pairing"),
        "index_bundle": residuals["index_bundle_gap"] <= config.tolerance("pairing"),
        "integer": residuals["integer_gap"] <= config.tolerance("pairing"),
        "cocycle": rel.cocycle_residual <= config.tolerance("residual"),
        "generator": round(abs(a)) == 1,
    }
    return results, residuals, passes


def _twisted_character(config, J):
    family = build_projective_family(config, J=J)
    conn = ConnectionData.for_primitive_bundle(J, config.N)
    return family, conn, odd_chern(family, conn)


def _parity_part(form, parity):
    return form.odd() if parity else form.even()


def _compare_twisted(config):
    steps, closedness, subcomplex = [], [], []
    spectral = None
    for r in config.resolutions:
        mesh = catalog_mesh(config.manifold, r)
        J = _primitive_bundle(config, mesh, r)
        family, conn, analytic = _twisted_character(config, J)
        closedness.append(analytic.closedness_residual)
        subcomplex.append(analytic.subcomplex_residual)
        steps.append(mesh.spacing)
        if spectral is None or r <= MAX_SPECTRAL_RESOLUTION:
            spectral = (r, mesh, J, family, conn, analytic)
    r, mesh, J, family, conn, analytic = spectral

    rel = relative_symbol_chern(family.symbol, base=mesh, fiber_points=config.fiber_points)
    topological = index_in_cohomology(rel, config)
    # the analytic character is odd and the pushforward even: both are paired with the
    # twisted-harmonic basis of each parity
    analytic_norms, topological_norms, gaps = {}, {}, {}
    for parity, name in ((1, "odd"), (0, "even")):
        basis = twisted_harmonic_basis(mesh, conn.twist, parity)
        a = twisted_harmonic_pairings(
            _parity_part(analytic.form, parity), conn.twist, basis, parity
        )
        t = twisted_harmonic_pairings(
            _parity_part(topological.form, parity), conn.twist, basis, parity
        )
        analytic_norms[name] = float(np.linalg.norm(a))
        topological_norms[name] = float(np.linalg.norm(t))
        gaps[name] = float(np.linalg.norm(a - t))
    _family, _conn, moved = _twisted_character(config, J.rebranched(1))
    deck = (analytic.form - moved.form).norm()
    overlap = overlap_gauge_residual(family, conn)

    results = {
        "steps": steps,
        "spectral_resolution": r,
        "symbol_character_norm": rel.odd.form.norm(),
        "topological_degree0": topological.degree0,
        "topological_norm": topological.form.norm(),
        "analytic_harmonic_norm": analytic_norms,
        "topological_harmonic_norm": topological_norms,
        "min_singular_value": analytic.min_singular_value,
        "conventions": _conventions("shift_character", "twist", "odd_character", "index_sign"),
    }
    residuals = {
        "harmonic_projection": gaps["odd"],
        "even_harmonic_projection": gaps["even"],
        "deck": deck,
        "overlap": overlap,
        "closedness": closedness[-1],
        "subcomplex": subcomplex[-1],
        "factorization": analytic.factorization_residual,
    }
    passes = {
        "harmonic_projection": gaps["odd"] <= config.tolerance("harmonic"),
        "even_harmonic_projection": gaps["even"] <= config.tolerance("harmonic"),
        "degree0": topological.degree0 == _expected_trace(config),
        "deck": deck <= config.tolerance("deck"),
        "overlap": overlap <= config.tolerance("overlap"),
        "factorization": analytic.factorization_residual <= config.tolerance("exact"),
        "symbol_character": results["symbol_character_norm"] <= config.tolerance("exact"),
    }
    for name, values in (("closedness", closedness), ("subcomplex", subcomplex)):
        passes[name], results["{}_slope".format(name)] = _slope_or_bound(
            config, steps, values, "curvature_slope"
        )
    return results, residuals, passes


@pipeline_registry.register(
    "index-compare",
    tolerances=(
        "integer", "pairing", "harmonic", "deck", "overlap", "exact", "curvature_slope",
        "residual",
    ),
    help="Analytic against topological index character",
)
def index_compare(config):
    if config.family == "twisted":
        return _compare_twisted(config)
    family, mesh, _J = _operator_family(config, config.resolution)
    if mesh is None:
        return _compare_point(config, family)
    return _compare_sphere(config, family, mesh)


def _composition_checks(config, results, residuals, passes):
    symbols = {name: sclquant.catalog_symbol(name) for name in sorted(sclquant.SYMBOL_CATALOG)}
    studies = {}
    for left, a in symbols.items():
        for right, b in symbols.items():
            column = "composition:{}*{}".format(left, right)
            if len(config.eps_grid) >= sclquant.MIN_EPS_VALUES:
                verdict = sclquant.scl_composition_defect(a, b, config.eps_grid)
                studies[column] = {"slope": verdict["slope"], "at_floor": verdict["at_floor"]}
                residuals[column] = verdict["defects"][-1]
                passes[column] = verdict["at_floor"] or (
                    verdict["slope"] is not None
                    and verdict["slope"] >= config.tolerance("defect_slope")
                )
            else:
                residuals[column] = sclquant.composition_defect_at(a, b, min(config.eps_grid))[0]
    results["composition"] = studies
    recovery = max(
        sclquant.recovery_defect(a, eps) for a in symbols.values() for eps in config.eps_grid
    )
    residuals["recovery"] = recovery
    passes["recovery"] = recovery <= config.tolerance("recovery")


def _scl_base(config):
    if config.manifold is cech.ManifoldTag.POINT:
        return None
    return catalog_mesh(config.manifold, config.resolution)


def _odd_scl_checks(config, base, results, residuals, passes):
    a = sclquant.winding_symbol()
    odd = sclquant.odd_scl_index(a, config, eps_grid=config.eps_grid, base=base)
    eps = max(config.eps_grid)
    vertices = 1 if base is None else base.count(0)
    by_vertex = [sclquant.odd_scl_pairing(odd, eps, vertex=v) for v in range(vertices)]
    by_eps = [sclquant.odd_scl_pairing(odd, value) for value in odd.epsilons]
    relative = sclquant.relative_scl_pairings(a, base)
    gaps = [abs(p - r) for p, r in zip(by_vertex, relative)]
    results.update(
        {
            "odd_pairing": by_vertex[0],
            "odd_eps": eps,
            "relative_pairing": relative[0],
            "symbol_winding": sclquant.symbol_winding(a),
        }
    )
    residuals.update(
        {
            "odd_pairing_gap": max(gaps),
            "odd_eps_spread": float(np.ptp(by_eps)),
            "odd_base_spread": float(np.ptp(by_vertex)),
            "polish": max(odd.polish_residuals),
        }
    )
    passes["odd_pairing"] = residuals["odd_pairing_gap"] <= config.tolerance("pairing")
    passes["odd_integer"] = _integer_gap(by_vertex[0]) <= config.tolerance("pairing")
    passes["odd_constant"] = (
        max(residuals["odd_eps_spread"], residuals["odd_base_spread"])
        <= config.tolerance("pairing")
    )


@pipeline_registry.register(
    "scl-check",
    tolerances=("recovery", "defect_slope", "pairing", "integer"),
    help="Semiclassical composition, symbol recovery and the odd and even index checks",
)
def scl_check(config):
    results, residuals, passes = {}, {}, {}
    _composition_checks(config, results, residuals, passes)
    base = _scl_base(config)
    _odd_scl_checks(config, base, results, residuals, passes)

    e, e0 = sclquant.even_scl_index(scenario=config)
    (E,) = e.values
    trace = float(np.trace(E - e0).real)
    results["even_trace"] = trace
    residuals["even_integer_gap"] = _integer_gap(trace)
    passes["even_integer"] = residuals["even_integer_gap"] <= config.tolerance("integer")

    if config.manifold is cech.ManifoldTag.SPHERE2:
        family, family_e0 = sclquant.even_scl_index(scenario=config, base=base)
        character = even_chern(family, family_e0)
        sphere_pairing = character.pairing(sphere_cycle(base, find_factor(base, "sphere")))
        results.update({"sphere_degree0": character.degree0, "sphere_pairing": sphere_pairing})
        residuals["sphere_integer_gap"] = _integer_gap(sphere_pairing)
        passes["sphere_pairing"] = (
            residuals["sphere_integer_gap"] <= config.tolerance("pairing")
            and round(abs(sphere_pairing)) == 1
        )
    return results, residuals, passes


@pipeline_registry.register(
    "thom-check", help="Index of the isotropic Bott operator, at N and 2N"
)
def thom_check(config):
    index = sclquant.thom_isotropic_check(config.N, config.eps_grid)
    doubled = sclquant.thom_isotropic_check(2 * config.N, config.eps_grid)
    _index, trace, mass = sclquant.thom_ground_state(
        config.N, config.eps_grid[-1], config.eps_grid[0]
    )
    results = {"index": index, "index_doubled": doubled, "ground_trace": trace}
    residuals = {"ground_mass_deficit": 1.0 - mass}
    passes = {"index": index == 1, "stable": doubled == index}
    return results, residuals, passes


TODD_COEFFICIENTS = (Fraction(1), Fraction(1, 2), Fraction(1, 12))


@pipeline_registry.register("grr", help="Exact Todd · ch coefficients and the c1 = 13 e1 relation")
def grr(config):
    check = grr_check(config.max_degree)
    wider = grr_check(config.max_degree + 2)
    degree4, c1_over_e1 = check["mmm_relation"]
    powers = range(config.max_degree // 2 + 1)
    results = {
        "todd": [check["todd"].coefficient(p) for p in powers],
        "ch": [check["ch"].coefficient(p) for p in powers],
        "product": [check["product"].coefficient(p) for p in powers],
        "degree4_coefficient": degree4,
        "c1_over_e1": c1_over_e1,
    }
    passes = {
        "todd": tuple(results["todd"][:3]) == TODD_COEFFICIENTS,
        "degree4_coefficient": degree4 == Fraction(13, 12),
        "mmm_relation": c1_over_e1 == 13,
        "truncation": all(
            check[key].coefficient(p) == wider[key].coefficient(p)
            for key in ("todd", "ch", "product")
            for p in powers
        ),
    }
    return results, {}, passes


def _check_tolerances(pipeline, config):
    unused = sorted(set(config.tolerances) - set(pipeline.tolerances))
    if unused:
        raise ValidationError(
            "Tolerances {} are not checked by {}".format(unused, pipeline.name),
            scenario=config.name,
        )


def _table_row(report, **leading):
    row = dict(leading)
    row.update(_scalars(report.results))
    row.update(_scalars(report.residuals))
    row["passed"] = report.passed
    return row


def run(subcommand, config):
    """Runs one pipeline on a validated config and returns its Report, with a one-row table."""
    pipeline = pipeline_registry.get(subcommand)
    _check_tolerances(pipeline, config)
    start = time.perf_counter()
    results, residuals, passes = pipeline.func(config)
    runtime_ms = int(round(1000 * (time.perf_counter() - start)))
    report = Report(subcommand, config, results, residuals, passes, runtime_ms)
    report.table = [_table_row(report)]
    logger.info(
        "%s on %s: %s in %s ms",
        subcommand,
        config.name,
        "passed" if report.passed else "failed {}".format(report.failures()),
        runtime_ms,
    )
    return report


def _swept(config, parameter, value):
    if parameter == "resolution":
        return config.replace(resolution=int(value)), 2.0 ** -int(value)
    if parameter == "N":
        return config.replace(N=int(value)), 1.0 / int(value)
    return config.replace(eps_grid=(float(value),)), float(value)


def _scalars(values):
    return {
        name: value
        for name, value in values.items()
        if isinstance(value, (int, float, Fraction, np.integer, np.floating))
        and not isinstance(value, bool)
    }


def _slope_tolerance(column):
    return SWEEP_SLOPES.get(column.split(":")[0])


def sweep(subcommand, config, parameter, values, workers=None):
    """Runs a pipeline once per value of `parameter` and fits slopes to the residual columns.

    Runs may execute concurrently; rows come back in the order of `values`.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ValidationError(
            "Sweeps run over {}, not {!r}".format(list(SWEEP_PARAMETERS), parameter)
        )
    values = list(values)
    if len(values) < MIN_SWEEP_VALUES:
        raise ValidationError(
            "A sweep needs at least {} values, got {}".format(MIN_SWEEP_VALUES, len(values))
        )
    pipeline = pipeline_registry.get(subcommand)
    _check_tolerances(pipeline, config)
    configs, steps = zip(*(_swept(config, parameter, v) for v in values))

    start = time.perf_counter()
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        reports = list(executor.map(lambda c: run(subcommand, c), configs))
    runtime_ms = int(round(1000 * (time.perf_counter() - start)))

    rows = []
    for value, step, report in zip(values, steps, reports):
        rows.append(_table_row(report, **{parameter: value, "step": step}))

    slopes, passes = {}, {"runs": all(report.passed for report in reports)}
    for column in sorted({name for report in reports for name in report.residuals}):
        column_values = [report.residuals.get(column) for report in reports]
        if any(v is None for v in column_values):
            continue
        slopes[column] = fit_loglog_slope(steps, column_values)
        tolerance = _slope_tolerance(column)
        if tolerance is not None:
            verdict = convergence_verdict(
                steps, column_values, config.tolerance(tolerance), config.tolerance("exact")
            )
            passes["slope:{}".format(column)] = verdict["passed"]
    for column in STABLE_COLUMNS:
        column_values = [report.results.get(column) for report in reports]
        if all(v is not None for v in column_values):
            passes["stable:{}".format(column)] = len(set(column_values)) == 1

    report = Report(
        subcommand,
        config,
        {"values": values, "steps": list(steps)},
        {},
        passes,
        runtime_ms,
    )
    report.table = rows
    report.slopes = slopes
    report.sweep = {"parameter": parameter, "values": values}
    logger.info("Sweep of %s over %s=%s: slopes %s", subcommand, parameter, values, slopes)
    return report
