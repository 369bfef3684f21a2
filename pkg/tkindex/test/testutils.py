import json
import os

import numpy as np

from tkindex.bundlegeom import (
    HermitianLineBundle,
    MeshCircleMap,
    build_circle_bundle,
    build_primitive_bundle,
    catalog_mesh,
)
from tkindex.cech import ManifoldTag
from tkindex.pipelines import run
from tkindex.scenarios import load_config


class MeshTestMixin:
    """Builds the coarse catalog meshes once per test class."""

    resolution = 0

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.circle = catalog_mesh(ManifoldTag.CIRCLE, cls.resolution)
        cls.sphere = catalog_mesh(ManifoldTag.SPHERE2, cls.resolution)
        cls.torus = catalog_mesh(ManifoldTag.TORUS2, cls.resolution)
        cls.s1xs2 = catalog_mesh(ManifoldTag.CIRCLE_TIMES_SPHERE2, cls.resolution)

    def rng(self, seed=0):
        return np.random.default_rng(seed)

    def assertFormsAlmostEqual(self, left, right, tolerance=1e-10):
        difference = (left - right).norm()
        self.assertLessEqual(
            difference, tolerance, "forms differ by {:.3e}".format(difference)
        )


class PrimitiveBundleTestMixin(MeshTestMixin):
    winding = 1
    degree = 1
    fiber_points = 8

    def primitive_bundle(self, mesh=None, winding=None, degree=None, fiber_points=None):
        mesh = mesh or self.s1xs2
        L = HermitianLineBundle(mesh, self.degree if degree is None else degree)
        t = build_circle_bundle(L, fiber_points or self.fiber_points)
        u = MeshCircleMap(mesh, self.winding if winding is None else winding)
        return build_primitive_bundle(u, t)


class ScenarioTestMixin:
    """Runs catalog scenarios at their coarsest resolution."""

    def run_pipeline(self, subcommand, name, **overrides):
        config = load_config(dict({"name": name, "resolutions": [0]}, **overrides))
        return run(subcommand, config)

    def write_config(self, directory, **values):
        path = os.path.join(directory, "{}.json".format(values.get("name", "custom")))
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(values, fh)
        return path
