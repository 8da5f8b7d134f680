"""
Configuration for hardyscope.
Every tolerance and threshold used by the estimators lives here with its default;
a JSON file may override any subset of them.
"""

import json
import os
from pathlib import Path
from typing import Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

DEFAULT_SEED = 20240601
CONFIG_ENV = "HARDYSCOPE_CONFIG"
THREADS_ENV = "HARDYSCOPE_THREADS"


class WalkConfig(BaseModel):
    """Walk-on-spheres parameters"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    eps_boundary: Optional[float] = Field(
        None, gt=0, description="Termination shell thickness; None means 1e-4 * scale_hint"
    )
    max_steps: int = Field(100_000, gt=0, description="Walks still running after this many jumps are discarded")
    r_escape: Optional[float] = Field(
        None, gt=0, description="Escape radius; None means 1e4 * the largest length in the query"
    )
    n_samples: int = Field(20_000, gt=0, description="Walks per estimate (n0 of the profile schedule)")
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2**64)
    batch_size: int = Field(4096, gt=0, description="Walks per random stream; fixes the partition")

    def boundary_eps(self, scale_hint: float) -> float:
        """Resolve the shell thickness for a spec"""
        return self.eps_boundary if self.eps_boundary is not None else 1e-4 * scale_hint

    def escape_radius(self, *lengths: float) -> float:
        """Resolve the escape radius for the lengths of a query"""
        if self.r_escape is not None:
            return self.r_escape
        return 1e4 * max(abs(x) for x in lengths)


class FitConfig(BaseModel):
    """Exponent fitting parameters"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    window: int = Field(4, ge=2, description="Entries per least-squares window")
    min_entries: int = Field(6, ge=2, description="Profile entries required before any are dropped")
    threshold_infinite: float = Field(8.0, gt=0, description="Slope level above which h is reported as +inf")
    drop_sigma: float = Field(2.0, ge=0, description="Entries with mean <= drop_sigma * stderr are dropped")
    trend_margin: float = Field(0.1, ge=0, description="Dead band around -1 for integral trend classification")
    consistency_tol: float = Field(0.1, ge=0, description="Tolerance of the number inequalities")


class QuadratureConfig(BaseModel):
    """Littlewood-Paley quadrature parameters"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    angular_nodes: int = Field(4096, gt=8, description="Uniform angular nodes away from singular directions")
    radial_gauss_nodes: int = Field(16, gt=1, description="Gauss-Legendre nodes per radial panel")
    angular_gauss_nodes: int = Field(16, gt=1, description="Gauss-Legendre nodes per graded angular panel")
    ladder_k_min: int = Field(3, ge=1)
    ladder_k_max: int = Field(16, ge=4)
    divergent_ratio: float = Field(1.06, gt=1, description="Increment ratio at or above which the ladder diverges")
    convergent_ratio: float = Field(0.94, gt=0, lt=1, description="Increment ratio at or below which the ladder converges")
    consecutive: int = Field(4, ge=1, description="Increment ratios that must agree")
    zero_excision_radius: float = Field(1e-3, gt=0, lt=0.5)


class SearchConfig(BaseModel):
    """Arc-width and constant searches"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    width_resolution: float = Field(1e-4, gt=0, lt=1)
    guard_sigma: float = Field(3.0, ge=0)
    max_doublings: int = Field(8, ge=1)
    constants_max_power: int = Field(20, ge=1, description="Doubling cap 2**k * R for rho and sigma")
    spot_checks: int = Field(8, ge=1)


class ScanConfig(BaseModel):
    """Geometric scans"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    angular_resolution: int = Field(4096, ge=64, description="Angles per circle in component counting")
    contact_samples: int = Field(4096, ge=64, description="Boundary samples per obstacle in contact tests")
    bloch_search_radius: float = Field(16.0, gt=0, description="Innermost search disk of the Bloch test, in units of scale_hint")
    bloch_grid_step: float = Field(0.25, gt=0, description="Grid step of the Bloch test, in units of scale_hint")
    class_d_powers: Tuple[int, int] = Field((0, 10), description="Class-D slices at radii 2**k * scale_hint for k in this closed range")


class HardyScopeConfig(BaseModel):
    """All tunables in one document"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    walk: WalkConfig = WalkConfig()
    fit: FitConfig = FitConfig()
    quadrature: QuadratureConfig = QuadratureConfig()
    search: SearchConfig = SearchConfig()
    scan: ScanConfig = ScanConfig()


def load_config(path: Optional[Union[str, Path]] = None) -> HardyScopeConfig:
    """Load a config file; falls back to $HARDYSCOPE_CONFIG, then to defaults"""
    if path is None:
        path = os.getenv(CONFIG_ENV)
    if not path:
        return HardyScopeConfig()
    with open(path, "r", encoding="utf-8") as handle:
        return HardyScopeConfig.model_validate(json.load(handle))


def thread_count() -> int:
    """Worker threads, capped by $HARDYSCOPE_THREADS"""
    available = os.cpu_count() or 1
    cap = os.getenv(THREADS_ENV)
    if cap is None or cap.strip() == "":
        return available
    try:
        value = int(cap)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {cap!r}")
    if value < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {cap!r}")
    return min(value, available)
