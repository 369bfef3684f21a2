import logging
from fractions import Fraction
from functools import lru_cache

import numpy as np


logger = logging.getLogger(__name__)


class TkIndexError(Exception):
    """Base exception for the workbench.

    Context keyword arguments name the object the error is about (a simplex, a base sample,
    a mesh cell, a scenario) and are rendered in front of the message.
    """

    context_labels = (
        ("scenario", "scenario"),
        ("simplex", "simplex"),
        ("sample", "sample"),
        ("cell", "cell"),
        ("key", "key"),
    )

    def __init__(self, *args, **context):
        self.context = {
            name: context.pop(name, None) for name, _label in self.context_labels
        }
        super().__init__(*args, **context)

    def __str__(self):
        message = ""
        parts = [
            "{} {}".format(label, self.context[name])
            for name, label in self.context_labels
            if self.context[name] is not None
        ]
        if parts:
            message += "At " + ", ".join(parts)
            if self.args:
                message += ": "

        message += super().__str__()
        return message

    def as_dict(self):
        """Machine-readable diagnostic used by the command line exit path."""
        return {
            "error": self.__class__.__name__,
            "message": super().__str__(),
            "context": {
                name: _jsonable(value)
                for name, value in self.context.items()
                if value is not None
            },
        }


class StructuralError(TkIndexError):
    """Degree, size or mesh mismatch between the inputs of an operation"""


class ValidationError(TkIndexError):
    """Input data violates a mathematical precondition"""


class ComputationError(TkIndexError):
    """A numerical procedure could not meet its contract"""


class CoefficientError(TkIndexError, TypeError):
    """Coefficient groups that cannot be paired"""


def _jsonable(value):
    if isinstance(value, (tuple, list)):
        return [_jsonable(item) for item in value]
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    return value if isinstance(value, (int, float, str)) else str(value)


def format_rational(value):
    """Serializes a rational as "p/q" (integers keep the "/1" so the type is unambiguous)."""
    value = Fraction(value)
    return "{}/{}".format(value.numerator, value.denominator)


def parse_rational(text):
    return Fraction(text)


def mod_one(value):
    """Reduces a Fraction or a float to [0, 1); integers come back as Fractions."""
    if isinstance(value, (int, Fraction, np.integer)):
        value = Fraction(int(value)) if not isinstance(value, Fraction) else value
        return value - (value.numerator // value.denominator)
    reduced = float(value) % 1.0
    # float modulo can land on 1.0 for tiny negative inputs
    return 0.0 if reduced >= 1.0 else reduced


def centered(value):
    """Representative of a circle value in (-1/2, 1/2]."""
    reduced = mod_one(value)
    return reduced - 1 if reduced > Fraction(1, 2) else reduced


def wrap_angle(phi):
    """Principal representative of an angle difference in (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(phi), 2 * np.pi)


@lru_cache(maxsize=None)
def gauss_legendre(order, lower=0.0, upper=1.0):
    """Gauss–Legendre nodes and weights on [lower, upper].

    Returns read-only arrays so the cached values cannot be altered by callers.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (upper - lower)
    nodes = lower + half * (nodes + 1.0)
    weights = half * weights
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def fit_loglog_slope(steps, residuals):
    """Least-squares slope of log(residual) against log(step).

    Args:
        steps: mesh sizes or epsilons, any order.
        residuals: positive residuals, same length.

    Returns:
        The fitted slope, or None when fewer than two positive residuals are available.
    """
    steps = np.asarray(steps, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    usable = residuals > 0
    if usable.sum() < 2:
        return None
    slope, _intercept = np.polyfit(np.log(steps[usable]), np.log(residuals[usable]), 1)
    return float(slope)


def convergence_verdict(steps, residuals, min_slope, floor):
    """Pass/fail of a refinement study.

    A study passes when every residual already sits at the roundoff floor (identities that
    the discretization preserves exactly) or when the fitted log-log slope reaches
    `min_slope`.
    """
    residuals = [float(r) for r in residuals]
    slope = fit_loglog_slope(steps, residuals)
    at_floor = max(residuals) <= floor
    passed = at_floor or (slope is not None and slope >= min_slope)
    if not passed and len(residuals) > 1:
        logger.warning(
            "Convergence study failed: residuals %s, slope %s (required %s)",
            residuals,
            slope,
            min_slope,
        )
    return {
        "steps": [float(h) for h in steps],
        "residuals": residuals,
        "slope": slope,
        "at_floor": at_floor,
        "passed": passed,
    }


def max_abs(values):
    values = np.asarray(values)
    return float(np.abs(values).max()) if values.size else 0.0
