"""Experiment configuration: strict JSON schema, schedules and validation.

A config is a JSON object. Recognized keys (all others are rejected):

    manifold            {"kind": "circle", "circumference": L}
                        {"kind": "torus", "lengths": [L1, ..., Ln]}
                        {"kind": "sphere"}
    T_values            list of center frequencies
    eta_rule            {"kind": "fixed", "value": eta}
                        {"kind": "log_power", "power": p, "scale": a}   eta = a (log T)^p
    r_rule              {"kind": "fixed", "value": r}
                        {"kind": "log_power", "alpha": a, "power": p}   r = a (log T)^p / T
    rT_values           optional list; when present r = rT / T for each entry
    resolution          ball quadrature resolution, or null for an automatic choice
    samples             Monte Carlo sample count
    epsilons            deviation levels
    law                 "gaussian" | "rademacher" | "uniform"
    laws                coefficient laws compared by covariance-check
    seed                master seed (unsigned 64-bit)
    output              output directory
    c                   Chernoff constant in (0, 1/2)
    C_eps, c_eps        constants of the assembled theorem bound
    rho_points          number of distances in kernel-profile sweeps
    rho_max_waves       sweep extends to rho_max_waves / T
    direction           sweep direction angle (radians) on tori
    grid_spacing        covering-grid spacing override; null means 1/T
    center_separation   distance between ball centers in covariance-check, in units of r
    single_point_centers  number of centers for single-point tail estimates
    single_point_samples  samples for single-point tail estimates
    supnorm_oversample  fine-grid oversampling factor for supnorm-scan
    include_whole_manifold  add a B = M row to variance-scan
"""
import json
import math
from dataclasses import asdict, dataclass, field, fields

from ..errors import ConfigError
from ..manifolds import Circle, FlatTorus, Sphere2


@dataclass(frozen=True)
class ExperimentConfig:
    manifold: dict = field(default_factory=lambda: {"kind": "torus", "lengths": [2 * math.pi, 2 * math.pi]})
    T_values: list = field(default_factory=lambda: [20.0, 40.0])
    eta_rule: dict = field(default_factory=lambda: {"kind": "log_power", "power": 2.0, "scale": 1.0})
    r_rule: dict = field(default_factory=lambda: {"kind": "log_power", "alpha": 1.0, "power": 2.0})
    rT_values: list = None
    resolution: int = None
    samples: int = 2000
    epsilons: list = field(default_factory=lambda: [0.25, 0.5, 1.0])
    law: str = "gaussian"
    laws: list = field(default_factory=lambda: ["gaussian", "rademacher", "uniform"])
    seed: int = 0
    output: str = "results"
    c: float = 0.25
    C_eps: float = 1.0
    c_eps: float = 1.0
    rho_points: int = 101
    rho_max_waves: float = 20.0
    direction: float = 0.3
    grid_spacing: float = None
    center_separation: float = 0.5
    single_point_centers: int = 4
    single_point_samples: int = 20000
    supnorm_oversample: int = 4
    include_whole_manifold: bool = False

    # derived schedules

    def model(self):
        return build_model(self.manifold)

    def eta(self, T):
        rule = self.eta_rule
        if rule["kind"] == "fixed":
            return float(rule["value"])
        return float(rule.get("scale", 1.0)) * math.log(T) ** float(rule["power"])

    def radii(self, T):
        if self.rT_values is not None:
            return [float(rt) / T for rt in self.rT_values]
        rule = self.r_rule
        if rule["kind"] == "fixed":
            return [float(rule["value"])]
        return [float(rule["alpha"]) * math.log(T) ** float(rule["power"]) / T]

    def spacing(self, T):
        return float(self.grid_spacing) if self.grid_spacing is not None else 1.0 / T

    def schedule(self):
        """(T, eta, [r, ...]) for every configured T."""
        return [(float(T), self.eta(T), self.radii(T)) for T in self.T_values]

    # serialization

    def to_dict(self):
        return asdict(self)

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def replace(self, **changes):
        data = self.to_dict()
        data.update(changes)
        return parse_config(data)


_KEYS = {f.name for f in fields(ExperimentConfig)}


def build_model(desc):
    if not isinstance(desc, dict) or "kind" not in desc:
        raise ConfigError("manifold must be an object with a 'kind'")
    kind = desc["kind"]
    allowed = {"circle": {"kind", "circumference"}, "torus": {"kind", "lengths"}, "sphere": {"kind"}}
    if kind not in allowed:
        raise ConfigError(f"unknown manifold kind {kind!r}")
    extra = set(desc) - allowed[kind]
    if extra:
        raise ConfigError(f"unknown manifold keys {sorted(extra)}")
    if kind == "circle":
        return Circle(float(desc.get("circumference", 2 * math.pi)))
    if kind == "torus":
        return FlatTorus(tuple(float(v) for v in desc["lengths"]))
    return Sphere2()


def _check_rule(rule, name, kinds):
    if not isinstance(rule, dict) or rule.get("kind") not in kinds:
        raise ConfigError(f"{name} must be an object with kind in {sorted(kinds)}")
    extra = set(rule) - kinds[rule["kind"]]
    if extra:
        raise ConfigError(f"unknown {name} keys {sorted(extra)}")
    missing = kinds[rule["kind"]] - set(rule) - {"scale"}
    if missing:
        raise ConfigError(f"{name} is missing {sorted(missing)}")


def validate(cfg):
    """Check every derived (T, eta, r) before any computation starts."""
    try:
        model = cfg.model()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    _check_rule(cfg.eta_rule, "eta_rule", {"fixed": {"kind", "value"}, "log_power": {"kind", "power", "scale"}})
    _check_rule(cfg.r_rule, "r_rule", {"fixed": {"kind", "value"}, "log_power": {"kind", "alpha", "power"}})
    if not cfg.T_values:
        raise ConfigError("T_values must not be empty")
    for T, eta, radii in cfg.schedule():
        if not (T > 0 and math.isfinite(T)):
            raise ConfigError(f"T must be positive, got {T}")
        if not 0 < eta < T:
            raise ConfigError(f"need 0 < eta < T, got eta={eta} at T={T}")
        for r in radii:
            if not 0 < r < model.injectivity_radius:
                raise ConfigError(
                    f"need 0 < r < injectivity radius {model.injectivity_radius}, got r={r} at T={T}"
                )
    if cfg.resolution is not None and (not isinstance(cfg.resolution, int) or cfg.resolution < 1):
        raise ConfigError("resolution must be a positive integer or null")
    if not isinstance(cfg.samples, int) or cfg.samples < 1:
        raise ConfigError("samples must be a positive integer")
    if any((not isinstance(e, (int, float))) or e < 0 for e in cfg.epsilons):
        raise ConfigError("epsilons must be nonnegative numbers")
    for law in [cfg.law, *cfg.laws]:
        if law not in ("gaussian", "rademacher", "uniform"):
            raise ConfigError(f"unknown law {law!r}")
    if not 0 < cfg.c < 0.5:
        raise ConfigError("c must lie in (0, 1/2)")
    if not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.grid_spacing is not None and cfg.grid_spacing <= 0:
        raise ConfigError("grid_spacing must be positive")
    return cfg


def parse_config(data):
    """Build a validated config from a dict; unknown keys are an error."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data = dict(data)
    for key in ("T_values", "epsilons", "rT_values", "laws"):
        if data.get(key) is not None:
            data[key] = [float(v) if key != "laws" else v for v in data[key]]
    return validate(ExperimentConfig(**data))


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(json.load(fh))
