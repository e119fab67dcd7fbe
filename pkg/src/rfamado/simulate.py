"""Logistic max-stable samplers.

Exact sampling uses the positive-stable mixture behind the Gumbel copula:
with ``S`` positive stable of index ``alpha`` (``E exp(-tS) = exp(-t^alpha)``)
and iid standard exponentials ``E_1, ..., E_m``, the vector
``Z_j = (S / E_j)^alpha`` has unit Frechet margins and joint CDF
``exp{-(z_1^(-1/alpha) + ... + z_m^(-1/alpha))^alpha}``. ``S`` is drawn with
Kanter's representation

    S = sin(alpha U) / sin(U)^(1/alpha) * (sin((1 - alpha) U) / E)^((1 - alpha)/alpha)

for ``U ~ Uniform(0, pi)`` and ``E ~ Exp(1)``; everything is evaluated in
logs. Frechet margins follow from ``Y = sigma * Z^xi``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, GridSeries, point_seed
from .errors import ConfigError, DataError
from .gevtheory import BivariateGevSpec, GevMargin


def log_positive_stable(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    """Log of positive alpha-stable draws with Laplace transform ``exp(-t^alpha)``."""
    if not 0 < alpha <= 1:
        raise ConfigError(f"alpha must lie in (0, 1], got {alpha}")
    if alpha == 1.0:
        return np.zeros(size)
    u = rng.uniform(0.0, math.pi, size)
    e = rng.standard_exponential(size)
    return (
        np.log(np.sin(alpha * u))
        - np.log(np.sin(u)) / alpha
        + (1.0 - alpha) / alpha * (np.log(np.sin((1.0 - alpha) * u)) - np.log(e))
    )


def log_unit_frechet_logistic(alpha: float, n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """(n, m) array of log unit-Frechet variates with exchangeable logistic dependence."""
    log_s = log_positive_stable(alpha, n, rng)
    log_e = np.log(rng.standard_exponential((n, m)))
    return alpha * (log_s[:, None] - log_e)


def sample_bivariate_logistic(spec: BivariateGevSpec, n: int, seed=None):
    """``n`` iid pairs from the logistic bivariate Frechet law in ``spec``."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = np.random.default_rng(seed)
    log_z = log_unit_frechet_logistic(spec.alpha, n, 2, rng)
    y1 = spec.m1.sigma * np.exp(spec.m1.xi * log_z[:, 0])
    y2 = spec.m2.sigma * np.exp(spec.m2.xi * log_z[:, 1])
    return y1, y2


def joint_cdf(spec: BivariateGevSpec, x, y):
    """Exact ``P(Y1 <= x, Y2 <= y)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    # -1/log F_i(x) = (x / sigma_i)^(1/xi_i)
    lz1 = np.log(x / spec.m1.sigma) / spec.m1.xi
    lz2 = np.log(y / spec.m2.sigma) / spec.m2.xi
    a = spec.alpha
    return np.exp(-np.exp(a * np.logaddexp(-lz1 / a, -lz2 / a)))


@dataclass(frozen=True)
class SimPoint:
    point_id: str
    lat: float = 0.0
    lon: float = 0.0
    scale: float = 1.0


@dataclass(frozen=True)
class SimCluster:
    cluster_id: str
    points: tuple
    margin: GevMargin = field(default_factory=GevMargin)
    alpha: float = 0.5

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"cluster {self.cluster_id}: alpha must lie in (0, 1]")
        if not self.points:
            raise ConfigError(f"cluster {self.cluster_id}: no points")
        for p in self.points:
            if not p.scale > 0:
                raise ConfigError(f"point {p.point_id}: scale must be positive")


@dataclass(frozen=True)
class SimGridSpec:
    """Clusters of exchangeable logistic points; clusters are mutually independent.

    Point ``j`` of a cluster follows ``scale_j * sigma * Z_j^xi``, so members of
    one cluster are homogeneous with ratio ``scale_k / scale_j``.
    """

    n: int
    clusters: tuple
    start_year: int = 1
    label: str = "simulated"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        ids = [p.point_id for c in self.clusters for p in c.points]
        if len(set(ids)) != len(ids):
            raise ConfigError("point ids must be unique across clusters")
        cids = [c.cluster_id for c in self.clusters]
        if len(set(cids)) != len(cids):
            raise ConfigError("cluster ids must be unique")

    @property
    def p(self) -> int:
        return sum(len(c.points) for c in self.clusters)

    def truth(self) -> dict:
        """point_id -> cluster_id."""
        return {p.point_id: c.cluster_id for c in self.clusters for p in c.points}

    @classmethod
    def from_dict(cls, obj) -> "SimGridSpec":
        try:
            clusters = []
            for c in obj["clusters"]:
                pts = tuple(
                    SimPoint(str(p["point_id"]), float(p.get("lat", 0.0)), float(p.get("lon", 0.0)),
                             float(p.get("scale", 1.0)))
                    for p in c["points"]
                )
                margin = GevMargin(float(c.get("sigma", 1.0)), float(c.get("xi", 0.1)))
                clusters.append(SimCluster(str(c["id"]), pts, margin, float(c["alpha"])))
            return cls(int(obj["n"]), tuple(clusters), int(obj.get("start_year", 1)), str(obj.get("label", "simulated")))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise DataError(f"invalid simulation spec: {exc!r}") from None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "start_year": self.start_year,
            "label": self.label,
            "clusters": [
                {
                    "id": c.cluster_id, "alpha": c.alpha, "sigma": c.margin.sigma, "xi": c.margin.xi,
                    "points": [{"point_id": p.point_id, "lat": p.lat, "lon": p.lon, "scale": p.scale} for p in c.points],
                }
                for c in self.clusters
            ],
        }


def load_sim_spec(path) -> SimGridSpec:
    with Path(path).open(encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: {exc}") from None
    return SimGridSpec.from_dict(obj)


def sample_grid(spec: SimGridSpec, seed: int) -> Dataset:
    """Draw a clustered dataset.

    The stable factor of each cluster comes from stream ``cluster:<id>`` and
    each point's exponentials from stream ``point:<id>`` (see
    :func:`rfamado.dataset.point_seed`), so the output is independent of
    point or cluster order.
    """
    years = np.arange(spec.start_year, spec.start_year + spec.n)
    points = []
    for c in spec.clusters:
        crng = np.random.default_rng(point_seed(seed, "cluster:" + c.cluster_id))
        log_s = log_positive_stable(c.alpha, spec.n, crng)
        for p in c.points:
            prng = np.random.default_rng(point_seed(seed, "point:" + p.point_id))
            log_z = c.alpha * (log_s - np.log(prng.standard_exponential(spec.n)))
            values = p.scale * c.margin.sigma * np.exp(c.margin.xi * log_z)
            points.append(GridSeries(p.point_id, p.lat, p.lon, values, years))
    return Dataset(tuple(points), spec.label)


def planted_spec(n=150, per_cluster=50, clusters_per_hemisphere=2, alpha=0.1, xi=0.1,
                 scale_range=(0.5, 2.0), seed=0, label="planted") -> SimGridSpec:
    """Regular lat/lon layout with a few clusters per hemisphere.

    Per-point scales are spread log-uniformly over ``scale_range`` (fixed by
    ``seed``), so clusters are homogeneous only up to scale.
    """
    rng = np.random.default_rng(seed)
    clusters = []
    ncols = 10
    for h, sign in (("N", 1.0), ("S", -1.0)):
        for k in range(clusters_per_hemisphere):
            pts = []
            for m in range(per_cluster):
                row, col = divmod(m, ncols)
                lat = sign * (2.5 + 5.0 * (row + k * math.ceil(per_cluster / ncols)))
                lon = -177.5 + 5.0 * col
                scale = float(np.exp(rng.uniform(math.log(scale_range[0]), math.log(scale_range[1]))))
                pts.append(SimPoint(f"{h}{k}_{m:03d}", min(lat, 87.5) if sign > 0 else max(lat, -87.5), lon, scale))
            clusters.append(SimCluster(f"{h}{k}", tuple(pts), GevMargin(1.0, xi), alpha))
    return SimGridSpec(n, tuple(clusters), 1, label)
