"""Scenario configuration: geometry, users, power constants, solver settings."""

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import ArrayGeometry, UserPosition, build_channel_set, near_field_boundary
from .pa import PAConfig
from .power import PowerConfig
from .sa import SAConfig

KNOWN_METHODS = ("PA-SA", "PA-FA", "PA-ES", "EA-FA")

_GEOMETRY_KEYS = {"S", "Nx", "Ny", "d", "lambda", "D", "b", "origins",
                  "amplitude_model"}
_USER_KEYS = {"positions", "clusters"}
_CLUSTER_KEYS = {"V", "count", "range", "radius", "arc_deg"}
_POWER_KEYS = {"varsigma", "P_et", "P_syn", "P_ct", "P_cr"}
_SOLVER_KEYS = {"epsilon", "delta", "gamma", "lambda0", "max_outer", "max_dr",
                "dr_residual_tol", "max_sa_iters", "warm_start", "seed",
                "es_cap"}
_OUTPUT_KEYS = {"dir", "artifacts"}
_TOP_KEYS = {"geometry", "users", "power", "solver", "methods", "outputs"}


class ConfigError(ValueError):
    """Raised for unparseable or physically invalid scenario files."""


@dataclass(frozen=True)
class ClusterSpec:
    """Seeded user generator: V centers on an arc in front of the array.

    Users are drawn uniformly in a disc of the given radius around their
    cluster center; cluster sizes split the user count with the largest
    cluster first.
    """

    n_vr: int = 2
    count: int = 3
    range_m: float = 1.1
    radius_m: float = 0.15
    arc_deg: float = 80.0


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully specified benchmark scenario."""

    n_sub: int = 6
    nx: int = 32
    ny: int = 8
    d: float = 0.05
    wavelength: float = 0.1
    element_size: float = 0.025
    boresight_exp: float = 2.0
    origins: tuple = None
    amplitude_model: str = "center"
    positions: tuple = None            # explicit (x, y, z, vr) rows, or None
    clusters: ClusterSpec = field(default_factory=ClusterSpec)
    power: PowerConfig = field(default_factory=PowerConfig)
    epsilon: float = 1e-7
    delta: float = 1e-3
    gamma: float = 0.08
    lambda0: float = None
    max_outer: int = 200
    max_dr: int = 600
    dr_residual_tol: float = 1e-6
    max_sa_iters: int = 30
    warm_start: bool = True
    seed: int = 0
    es_cap: int = 12
    methods: tuple = ("PA-SA", "PA-FA", "PA-ES", "EA-FA")
    output_dir: str = "out"
    artifacts: tuple = ("results", "traces", "allocation")

    def geometry(self):
        return ArrayGeometry(n_sub=self.n_sub, nx=self.nx, ny=self.ny,
                             d=self.d, wavelength=self.wavelength,
                             element_size=self.element_size,
                             boresight_exp=self.boresight_exp,
                             sub_array_origins=self.origins)

    def pa_config(self):
        return PAConfig(epsilon=self.epsilon, max_outer=self.max_outer,
                        max_dr=self.max_dr,
                        dr_residual_tol=self.dr_residual_tol,
                        gamma=self.gamma, lambda0=self.lambda0)

    def sa_config(self):
        return SAConfig(delta=self.delta, max_iters=self.max_sa_iters,
                        warm_start=self.warm_start)

    def users(self, rng=None):
        """Materialize user positions, explicit or cluster-generated."""
        if self.positions is not None:
            return [UserPosition(x=p[0], y=p[1], z=p[2], vr_label=int(p[3]))
                    for p in self.positions]
        rng = rng if rng is not None else np.random.default_rng(self.seed)
        return generate_cluster_users(self.clusters, rng)

    def channel_set(self, rng=None):
        return build_channel_set(self.geometry(), self.users(rng),
                                 self.amplitude_model)


def cluster_sizes(count, n_vr):
    """Split count users over n_vr clusters, largest cluster first."""
    base = count // n_vr
    rem = count % n_vr
    return [base + (1 if v < rem else 0) for v in range(n_vr)]


def generate_cluster_users(spec, rng):
    """Draw users around V arc-placed cluster centers; seeded and S-independent."""
    if spec.n_vr < 1 or spec.count < spec.n_vr:
        raise ConfigError("need count >= V >= 1 users")
    half = math.radians(spec.arc_deg) / 2.0
    if spec.n_vr == 1:
        # a single moderately off-center VR: far enough from boresight that
        # activation pruning has non-stationarity to exploit, close enough
        # that several modules still serve the cluster
        angles = [0.3 * half]
    else:
        angles = list(np.linspace(-half, half, spec.n_vr))
    users = []
    for v, (angle, size) in enumerate(zip(angles, cluster_sizes(spec.count, spec.n_vr)),
                                      start=1):
        cx = spec.range_m * math.sin(angle)
        cz = spec.range_m * math.cos(angle)
        for _ in range(size):
            r = spec.radius_m * math.sqrt(rng.uniform())
            phi = rng.uniform(0.0, 2.0 * math.pi)
            users.append(UserPosition(x=cx + r * math.cos(phi),
                                      y=r * math.sin(phi),
                                      z=max(cz, 1e-3),
                                      vr_label=v))
    return users


def _check_keys(section, given, allowed):
    unknown = set(given) - allowed
    if unknown:
        raise ConfigError("unknown %s key(s): %s"
                          % (section, ", ".join(sorted(unknown))))


def _positive(section, data, keys):
    for k in keys:
        if k in data and not data[k] > 0:
            raise ConfigError("%s.%s must be positive" % (section, k))


def load_scenario(path):
    """Parse and validate a JSON scenario file; empty files yield defaults."""
    with open(path) as fh:
        text = fh.read().strip()
    raw = json.loads(text) if text else {}
    if not isinstance(raw, dict):
        raise ConfigError("scenario file must hold a JSON object")
    return scenario_from_dict(raw)


def scenario_from_dict(raw):
    _check_keys("top-level", raw, _TOP_KEYS)
    cfg = ScenarioConfig()

    geo = raw.get("geometry", {})
    _check_keys("geometry", geo, _GEOMETRY_KEYS)
    _positive("geometry", geo, ("S", "Nx", "Ny", "d", "lambda", "D"))
    if "b" in geo and geo["b"] < 0:
        raise ConfigError("geometry.b must be >= 0")
    cfg = replace(
        cfg,
        n_sub=int(geo.get("S", cfg.n_sub)),
        nx=int(geo.get("Nx", cfg.nx)),
        ny=int(geo.get("Ny", cfg.ny)),
        wavelength=float(geo.get("lambda", cfg.wavelength)),
        element_size=float(geo.get("D", geo.get("lambda", cfg.wavelength) / 4.0)),
        boresight_exp=float(geo.get("b", cfg.boresight_exp)),
        amplitude_model=geo.get("amplitude_model", cfg.amplitude_model),
    )
    cfg = replace(cfg, d=float(geo.get("d", cfg.wavelength / 2.0)))
    if "origins" in geo:
        cfg = replace(cfg, origins=tuple(tuple(o) for o in geo["origins"]))

    usr = raw.get("users", {})
    _check_keys("users", usr, _USER_KEYS)
    if "positions" in usr:
        rows = tuple(tuple(float(v) for v in p) for p in usr["positions"])
        for p in rows:
            if len(p) != 4:
                raise ConfigError("each user position needs [x, y, z, vr]")
            if p[2] <= 0:
                raise ConfigError("user z must be positive")
        cfg = replace(cfg, positions=rows)
    if "clusters" in usr:
        cl = usr["clusters"]
        _check_keys("users.clusters", cl, _CLUSTER_KEYS)
        _positive("users.clusters", cl, ("V", "count", "range", "radius", "arc_deg"))
        cfg = replace(cfg, clusters=ClusterSpec(
            n_vr=int(cl.get("V", cfg.clusters.n_vr)),
            count=int(cl.get("count", cfg.clusters.count)),
            range_m=float(cl.get("range", cfg.clusters.range_m)),
            radius_m=float(cl.get("radius", cfg.clusters.radius_m)),
            arc_deg=float(cl.get("arc_deg", cfg.clusters.arc_deg)),
        ))
        if cfg.clusters.count < cfg.clusters.n_vr:
            raise ConfigError("users.clusters.count must be >= V")

    pwr = raw.get("power", {})
    _check_keys("power", pwr, _POWER_KEYS)
    _positive("power", pwr, ("varsigma", "P_et"))
    for k in ("P_syn", "P_ct", "P_cr"):
        if k in pwr and pwr[k] < 0:
            raise ConfigError("power.%s must be >= 0" % k)
    cfg = replace(cfg, power=PowerConfig(
        varsigma=float(pwr.get("varsigma", cfg.power.varsigma)),
        p_et=float(pwr.get("P_et", cfg.power.p_et)),
        p_syn=float(pwr.get("P_syn", cfg.power.p_syn)),
        p_ct=float(pwr.get("P_ct", cfg.power.p_ct)),
        p_cr=float(pwr.get("P_cr", cfg.power.p_cr)),
    ))

    sol = raw.get("solver", {})
    _check_keys("solver", sol, _SOLVER_KEYS)
    _positive("solver", sol, ("epsilon", "delta", "gamma", "dr_residual_tol"))
    cfg = replace(
        cfg,
        epsilon=float(sol.get("epsilon", cfg.epsilon)),
        delta=float(sol.get("delta", cfg.delta)),
        gamma=float(sol.get("gamma", cfg.gamma)),
        lambda0=sol.get("lambda0", cfg.lambda0),
        max_outer=int(sol.get("max_outer", cfg.max_outer)),
        max_dr=int(sol.get("max_dr", cfg.max_dr)),
        dr_residual_tol=float(sol.get("dr_residual_tol", cfg.dr_residual_tol)),
        max_sa_iters=int(sol.get("max_sa_iters", cfg.max_sa_iters)),
        warm_start=bool(sol.get("warm_start", cfg.warm_start)),
        seed=int(sol.get("seed", cfg.seed)),
        es_cap=int(sol.get("es_cap", cfg.es_cap)),
    )

    if "methods" in raw:
        methods = tuple(raw["methods"])
        for m in methods:
            if m not in KNOWN_METHODS:
                raise ConfigError("unknown method %r" % (m,))
        cfg = replace(cfg, methods=methods)

    out = raw.get("outputs", {})
    _check_keys("outputs", out, _OUTPUT_KEYS)
    cfg = replace(cfg,
                  output_dir=out.get("dir", cfg.output_dir),
                  artifacts=tuple(out.get("artifacts", cfg.artifacts)))

    _warn_out_of_region(cfg)
    return cfg


def _warn_out_of_region(cfg):
    geom = cfg.geometry()
    boundary = near_field_boundary(geom)
    for i, u in enumerate(cfg.users()):
        r = float(np.linalg.norm(u.coords))
        if r > boundary:
            warnings.warn(
                "user %d at range %.3g m is beyond the near-field service "
                "boundary %.3g m; results may be far-field-like" % (i, r, boundary),
                stacklevel=3,
            )
