"""End-to-end sampler: random realization -> CFIE solve -> observables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bem import (
    BoundaryDiscretization,
    WaveSetup,
    assemble_cfie,
    eval_scattered,
    rhs_incident,
    solve_density,
)
from .interface import ArtificialInterface, CauchyData, cauchy_from_trace
from .mlmc import CoupledSample, SampleFields
from .randfield import KLBasis, deformed_surface, draw_parameters, rng_stream
from .surfaces import LandmarkSet


def fibonacci_sphere(n: int, radius: float) -> np.ndarray:
    """n points spread over a sphere by the golden-angle spiral."""
    k = np.arange(n)
    golden = np.pi * (np.sqrt(5.0) - 1.0)
    y = 1.0 - 2.0 * (k + 0.5) / n
    r = np.sqrt(1.0 - y * y)
    return radius * np.column_stack([np.cos(golden * k) * r, y, np.sin(golden * k) * r])


@dataclass(frozen=True)
class ScatteringSampler:
    """Pure map from (degree, stream id) to scattering observables.

    Instances are picklable and stateless, so samples may be computed by any
    worker in any order with identical results.
    """

    landmarks: LandmarkSet
    basis: KLBasis
    alpha: float
    wave: WaveSetup
    interface: ArtificialInterface
    eval_points: np.ndarray = field(repr=False)
    solver_tol: float = 1e-10

    def realization(self, base_seed: int, level: int, index: int):
        y = draw_parameters(rng_stream(base_seed, level, index), self.basis.m)
        return deformed_surface(self.basis, self.landmarks, self.alpha, y)

    def solve_fields(self, surface, degree: int, shared_from=None) -> tuple[SampleFields, object]:
        disc = BoundaryDiscretization(surface, degree, shared_from=shared_from)
        trace = solve_density(
            assemble_cfie(disc, self.wave), rhs_incident(disc, self.wave), self.wave,
            tol=self.solver_tol,
        )
        cauchy = cauchy_from_trace(disc, trace, self.interface)
        points = eval_scattered(disc, trace, self.eval_points)
        return SampleFields(cauchy, points), disc

    def coupled_sample(self, degree: int, base_seed: int, index: int,
                       pilot_tag: int | None = None) -> CoupledSample:
        """Level quantity at ``degree``: both degrees share one realization.

        ``pilot_tag`` shifts the stream level block so pilot draws never
        collide with estimator draws.
        """
        level_key = degree if pilot_tag is None else pilot_tag + degree
        surface = self.realization(base_seed, level_key, index)
        fine, disc = self.solve_fields(surface, degree)
        coarse = None
        if degree > 0:
            coarse, _ = self.solve_fields(surface, degree - 1, shared_from=disc)
        return CoupledSample(fine, coarse)

    def level_cost(self, degree: int) -> float:
        """Deterministic operation-count proxy for one coupled sample."""
        cost = _solve_cost(self._n_dof(degree))
        if degree > 0:
            cost += _solve_cost(self._n_dof(degree - 1))
        return cost

    def _n_dof(self, degree: int) -> int:
        return self.landmarks.n_patches * 4 * (degree + 1) ** 2


def _solve_cost(n_dof: int) -> float:
    # assembly scales close to n^1.45 at these sizes; the dense solve adds n^3
    return n_dof**1.45 + n_dof**3 / 2.0e5
