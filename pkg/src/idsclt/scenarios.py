"""Bundled reference scenarios."""
from __future__ import annotations

from .disorder import SingleSite, SiteDistribution, derive_seed
from .experiments.ensemble import EnsembleSpec
from .geometry import BoxSpec
from .magnetic import MagneticField
from .testfun import resolvent_power

SCENARIO_SEED = 20240611


def reference_spec(L: int, n_samples: int = 2000, bc: str = "dirichlet", seed: int = SCENARIO_SEED,
                   E: float = -2.0, m: int = 3) -> EnsembleSpec:
    """d=1, q=1, f = (x - E)^-m, uniform(0, 1) couplings, single-cell indicator.

    Each L gets its own derived seed so box sizes are statistically independent,
    while the two boundary conditions at one L share every configuration.
    """
    return EnsembleSpec(
        box=BoxSpec(1, L, 1, bc),
        field=MagneticField.zero(1),
        dist=SiteDistribution.uniform(0.0, 1.0),
        site=SingleSite.indicator(1, 1),
        f=resolvent_power(E, m),
        n_samples=n_samples,
        seed=derive_seed(seed, L),
    )


def point_mass_control(L: int, n_samples: int = 200, c: float = 0.5, seed: int = SCENARIO_SEED) -> EnsembleSpec:
    base = reference_spec(L, n_samples, seed=seed)
    return EnsembleSpec(base.box, base.field, SiteDistribution.point_mass(c), base.site, base.f,
                        n_samples, base.seed)


def zero_site_control(L: int, n_samples: int = 200, seed: int = SCENARIO_SEED) -> EnsembleSpec:
    base = reference_spec(L, n_samples, seed=seed)
    return EnsembleSpec(base.box, base.field, base.dist, SingleSite.zero(1, 1), base.f,
                        n_samples, base.seed)
