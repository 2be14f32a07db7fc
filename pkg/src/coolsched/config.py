"""Run configuration: one YAML file with sections, env-var overrides.

Environment variables prefixed COOLSCHED_ override file values for CI
sweeps, e.g. COOLSCHED_QFR__REGIMES=8 sets qfr.regimes. Values are parsed
as YAML scalars.
"""

import os
from dataclasses import dataclass, field

import yaml

from .mdp import CostSpec, StateSpace
from .qfr import FourierDesign
from .thermal import ChillerSpec, FacilitySpec, HeatLoadSpec

ENV_PREFIX = "COOLSCHED_"

KNOWN_CONTROLLERS = ("qfr-mdp", "greedy", "fixed-rule")

DEFAULTS = {
    "paths": {
        "price_csv": None,
        "temperature_csv": None,
        "workload_csv": None,   # null: synthesize from heat_load.synth_*
        "out_dir": "out",
    },
    "facility": {
        "floor_area_m2": 3000.0,
        "ceiling_height_m": 4.0,
        "slab_thickness_m": 0.2,
        "rho_air": 1.204,
        "cp_air": 1005.0,
        "rho_concrete": 2300.0,
        "cp_concrete": 880.0,
        "c_equipment_j_per_degc": 4.0e7,
        "gamma_env_w_per_degc": 10000.0,
    },
    "chillers": {
        "count": 4,
        "eta_w": 1.25e6,
        "cop_lo_temp_c": 15.0,
        "cop_hi_temp_c": 40.0,
        "cop_lo": 5.0,
        "cop_hi": 2.5,
    },
    "heat_load": {
        "q_base_w": 1.0e6,
        "phi_w_per_core": 10.0,
        "synth_base_cores": 50000,
        "synth_amplitude": 0.4,
        "synth_noise": 0.05,
    },
    "cost": {
        "t_min_c": 18.0,
        "t_max_c": 27.0,
        "lambda_under_per_degc": 1000.0,
        "lambda_over_per_degc": 1000.0,
    },
    "qfr": {
        "regimes": 4,
        "daily_harmonics": 3,
        "seasonal_harmonics": 2,
    },
    "chain": {
        "alpha": 0.5,
        "grouping": "month",
    },
    "mdp": {
        "theta_min_c": 15.0,
        "theta_max_c": 32.0,
        "theta_step_c": 0.5,
        # temperature band inset used during planning only; compensates the
        # half-step quantization error of the policy lookup. null: step / 2.
        "band_margin_c": None,
        "planning_cycle": "day",   # "day" or "window"
        "planning_day": None,      # ISO date, e.g. 2024-07-15; default: first
                                   # simulate window's July 15 when present
    },
    "windows": {
        "train": [],
        "simulate": [],
    },
    "simulation": {
        "initial_theta_c": None,   # null: midpoint of the safety band
        "argmax_policy": False,
    },
    "fixed_rule": {
        "peak_start": 16,
        "peak_end": 19,
        "precool_start": 2,
        "precool_end": 4,
    },
    "controllers": ["qfr-mdp", "greedy", "fixed-rule"],
    "seed": 0,
}


class ConfigError(ValueError):
    """Configuration file is missing, malformed, or inconsistent."""


def _merge(base, override, path="config"):
    merged = dict(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"{path}: unknown key {key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}.{key}: expected a section")
            merged[key] = _merge(base[key], value, f"{path}.{key}")
        else:
            merged[key] = value
    return merged


def _apply_env_overrides(doc, environ):
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        parts = name[len(ENV_PREFIX):].lower().split("__")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            value = raw
        node = doc
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"env {name}: no section {part!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"env {name}: unknown key {parts[-1]!r}")
        node[parts[-1]] = value
    return doc


@dataclass
class RunConfig:
    """Validated configuration with spec objects built from the raw document."""

    raw: dict
    base_dir: str = "."

    def __post_init__(self):
        self._validate()

    @classmethod
    def from_file(cls, path, environ=None) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = yaml.safe_load(fh) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {path} must be a mapping")
        merged = _merge(DEFAULTS, doc)
        merged = _apply_env_overrides(merged, os.environ if environ is None else environ)
        return cls(raw=merged, base_dir=os.path.dirname(os.path.abspath(path)))

    def _validate(self):
        raw = self.raw
        try:
            # build every derived spec once so bad numbers fail here, not mid-run
            _ = (self.facility, self.chiller, self.heat, self.cost, self.space,
                 self.design, self.planning_cost)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name in raw["controllers"]:
            if name not in KNOWN_CONTROLLERS:
                raise ConfigError(f"unknown controller {name!r}")
        if raw["chain"]["grouping"] not in ("month", "season", "single", "pooled"):
            raise ConfigError(f"unknown chain grouping {raw['chain']['grouping']!r}")
        if raw["mdp"]["planning_cycle"] not in ("day", "window"):
            raise ConfigError("mdp.planning_cycle must be 'day' or 'window'")
        for kind in ("train", "simulate"):
            for win in raw["windows"][kind]:
                if not (isinstance(win, (list, tuple)) and len(win) == 2):
                    raise ConfigError(f"windows.{kind} entries must be [start, end]")

    def path(self, key):
        value = self.raw["paths"][key]
        if value is None:
            return None
        return value if os.path.isabs(value) else os.path.join(self.base_dir, value)

    def require_path(self, key):
        value = self.path(key)
        if value is None:
            raise ConfigError(f"paths.{key} is required for this command")
        if key != "out_dir" and not os.path.exists(value):
            raise ConfigError(f"paths.{key}: file not found: {value}")
        return value

    @property
    def facility(self) -> FacilitySpec:
        f = self.raw["facility"]
        return FacilitySpec(
            floor_area=f["floor_area_m2"], ceiling_height=f["ceiling_height_m"],
            slab_thickness=f["slab_thickness_m"], rho_air=f["rho_air"],
            cp_air=f["cp_air"], rho_concrete=f["rho_concrete"],
            cp_concrete=f["cp_concrete"],
            c_equipment=f["c_equipment_j_per_degc"],
            gamma_env=f["gamma_env_w_per_degc"],
        )

    @property
    def chiller(self) -> ChillerSpec:
        c = self.raw["chillers"]
        return ChillerSpec(a_max=c["count"], eta=c["eta_w"],
                           cop_lo_temp=c["cop_lo_temp_c"],
                           cop_hi_temp=c["cop_hi_temp_c"],
                           cop_lo=c["cop_lo"], cop_hi=c["cop_hi"])

    @property
    def heat(self) -> HeatLoadSpec:
        h = self.raw["heat_load"]
        return HeatLoadSpec(q_base=h["q_base_w"], phi=h["phi_w_per_core"])

    @property
    def cost(self) -> CostSpec:
        c = self.raw["cost"]
        return CostSpec(t_min=c["t_min_c"], t_max=c["t_max_c"],
                        lambda_under=c["lambda_under_per_degc"],
                        lambda_over=c["lambda_over_per_degc"])

    @property
    def band_margin(self) -> float:
        margin = self.raw["mdp"]["band_margin_c"]
        return self.raw["mdp"]["theta_step_c"] / 2.0 if margin is None else margin

    @property
    def planning_cost(self) -> CostSpec:
        base = self.cost
        margin = self.band_margin
        if base.t_min + margin >= base.t_max - margin:
            raise ConfigError("band margin leaves no planning band")
        return CostSpec(t_min=base.t_min + margin, t_max=base.t_max - margin,
                        lambda_under=base.lambda_under,
                        lambda_over=base.lambda_over)

    @property
    def space(self) -> StateSpace:
        m = self.raw["mdp"]
        return StateSpace(theta_min=m["theta_min_c"], theta_max=m["theta_max_c"],
                          theta_step=m["theta_step_c"],
                          m=self.raw["qfr"]["regimes"],
                          a_max=self.raw["chillers"]["count"])

    @property
    def design(self) -> FourierDesign:
        q = self.raw["qfr"]
        return FourierDesign(daily_harmonics=q["daily_harmonics"],
                             seasonal_harmonics=q["seasonal_harmonics"])

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def initial_theta(self) -> float:
        value = self.raw["simulation"]["initial_theta_c"]
        if value is None:
            return 0.5 * (self.cost.t_min + self.cost.t_max)
        return float(value)
