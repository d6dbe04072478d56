"""Diffusion across the boundary between two habitats.

A particle with diffusivity a_+ on [0, inf) and a_- on (-inf, 0) is
driven either by the divergence-form generator L = (1/2) d/dx(a d/dx) or
by A = (1/2) a d^2/dx^2. After the change of scale
Phi(x) = int_0^x a(u)^(-1/2) du both become skew Brownian motions, with
skewness +s for L and -s for A, where

    s = (sqrt(a_+) - sqrt(a_-)) / (sqrt(a_+) + sqrt(a_-)).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .likelihood import mle
from .num_core import DomainError, RngStream
from .sbm_sim import GridPath, SbmParams, simulate_path

MIN_SIDE_STEPS = 10


class Generator(str, Enum):
    L = "L"
    A = "A"


class InsufficientData(DomainError):
    pass


@dataclass(frozen=True)
class HabitatModel:
    a_plus: float
    a_minus: float
    generator: Generator = Generator.L

    def __post_init__(self):
        if not (self.a_plus > 0 and self.a_minus > 0):
            raise DomainError("diffusivities must be positive")
        object.__setattr__(self, "generator", Generator(self.generator))

    @property
    def skewness(self) -> float:
        """Skewness of Phi(X)."""
        sp, sm = math.sqrt(self.a_plus), math.sqrt(self.a_minus)
        s = (sp - sm) / (sp + sm)
        return s if self.generator is Generator.L else -s


def phi(x, a_plus, a_minus):
    """Scale map x / sqrt(a(x)), continuous and increasing through 0."""
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0.0, x / math.sqrt(a_plus), x / math.sqrt(a_minus))


def phi_inverse(y, a_plus, a_minus):
    y = np.asarray(y, dtype=float)
    return np.where(y >= 0.0, y * math.sqrt(a_plus), y * math.sqrt(a_minus))


def simulate_habitat(model: HabitatModel, x0: float, T: float, n: int,
                     stream: RngStream) -> GridPath:
    """Exact grid path of the habitat diffusion started at ``x0 >= 0``."""
    y0 = float(phi(x0, model.a_plus, model.a_minus))
    sbm = simulate_path(SbmParams(model.skewness, y0, T, n), stream)
    values = phi_inverse(sbm.values, model.a_plus, model.a_minus)
    return GridPath(SbmParams(model.skewness, x0, T, n), values)


@dataclass(frozen=True)
class Diffusivities:
    a_plus: float | None
    a_minus: float | None
    steps_plus: int
    steps_minus: int

    def standard_errors(self):
        # realized variance of k Gaussian increments has relative sd sqrt(2/k)
        se_p = self.a_plus * math.sqrt(2.0 / self.steps_plus) if self.a_plus else math.nan
        se_m = self.a_minus * math.sqrt(2.0 / self.steps_minus) if self.a_minus else math.nan
        return se_p, se_m


def estimate_diffusivities(path: GridPath) -> Diffusivities:
    """Realized variance per side, using only steps that stay strictly on one side.

    A side with fewer than 10 such steps is reported as ``None``.
    """
    x = path.values
    dx2 = np.diff(x) ** 2
    plus = (x[:-1] > 0) & (x[1:] > 0)
    minus = (x[:-1] < 0) & (x[1:] < 0)
    k_p, k_m = int(plus.sum()), int(minus.sum())
    a_p = float(dx2[plus].sum() / (path.delta * k_p)) if k_p >= MIN_SIDE_STEPS else None
    a_m = float(dx2[minus].sum() / (path.delta * k_m)) if k_m >= MIN_SIDE_STEPS else None
    return Diffusivities(a_p, a_m, k_p, k_m)


@dataclass
class HabitatDecision:
    a_plus_hat: float
    a_minus_hat: float
    theta_hat: float
    decided: Generator
    indeterminate: bool
    diffusivity_z: float
    theta_boundary: bool

    def to_json(self) -> str:
        d = asdict(self)
        d["decided"] = self.decided.value
        return json.dumps(d, indent=2)


def decide_generator(path: GridPath) -> HabitatDecision:
    """Pick L or A from the sign of the skewness of the rescaled path.

    L is chosen when the MLE of the skewness of Phi(X) has the sign of
    a_+ - a_-. The outcome is flagged indeterminate when the two estimated
    diffusivities are within two standard errors of each other.
    """
    est = estimate_diffusivities(path)
    if est.a_plus is None or est.a_minus is None:
        raise InsufficientData(
            f"need {MIN_SIDE_STEPS} same-side steps on each side, "
            f"got {est.steps_plus} (+) and {est.steps_minus} (-)")
    se_p, se_m = est.standard_errors()
    gap = est.a_plus - est.a_minus
    z = gap / math.hypot(se_p, se_m)
    p = path.params
    y = phi(path.values, est.a_plus, est.a_minus)
    rescaled = GridPath(SbmParams(0.0, float(y[0]), p.T, p.n), y)
    report = mle(rescaled)
    same_sign = np.sign(report.theta_mle) == np.sign(gap)
    return HabitatDecision(
        a_plus_hat=est.a_plus, a_minus_hat=est.a_minus, theta_hat=report.theta_mle,
        decided=Generator.L if same_sign else Generator.A,
        indeterminate=bool(abs(z) < 2.0), diffusivity_z=float(z),
        theta_boundary=report.boundary)
