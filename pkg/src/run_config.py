"""
Run configuration: one JSON document deep-merged over the config.py defaults
"""
import copy
import hashlib
import json
import os
from dataclasses import dataclass
from typing import Dict, Optional

import config as cfg
from src.exceptions import ConfigError, DataError
from src.logger_utils import ColoredLogger as log

BLOCKS = ("inputs", "data", "pca", "backtest", "regimes", "dp", "simulate", "frontier", "synthetic")
TOP_LEVEL = {"schema_version", "seed", "output_dir", "workers", *BLOCKS}
INPUT_KEYS = ("prices", "returns", "regime_labels")


def default_document():
    """Every parameter block at its config.py default"""
    return {
        "schema_version": cfg.CONFIG_SCHEMA_VERSION,
        "seed": cfg.DEFAULT_SEED,
        "output_dir": cfg.DEFAULT_OUTPUT_DIR,
        "workers": cfg.DEFAULT_WORKERS,
        "inputs": {"prices": None, "returns": None, "regime_labels": None},
        "data": {"missing_policy": cfg.MISSING_POLICY, "date_column": cfg.DATE_COLUMN},
        "pca": {"components": cfg.PCA_COMPONENTS, "correlation": cfg.PCA_CORRELATION,
                "universe": cfg.PCA_UNIVERSE},
        "backtest": {
            "days_per_week": cfg.DAYS_PER_WEEK,
            "schemes_weeks": [list(s) for s in cfg.SCHEMES_WEEKS],
            "quantile": cfg.QUANTILE,
            "turnover_cap": cfg.TURNOVER_CAP,
            "cost_bps": cfg.COST_BPS,
            "ratios": list(cfg.RATIO_SUITE),
            "rolling_window": cfg.ROLLING_WINDOW,
            "rolling_ratios": list(cfg.ROLLING_SUITE),
            "forward_scenarios": cfg.FORWARD_SCENARIOS,
            "forward_stride": cfg.FORWARD_STRIDE,
        },
        "regimes": {"source": cfg.REGIME_SOURCE, "smoothing": cfg.TRANSITION_SMOOTHING,
                    "hmm_max_iter": cfg.HMM_MAX_ITER, "hmm_tol": cfg.HMM_TOL,
                    "hmm_variance_floor": cfg.HMM_VARIANCE_FLOOR, "figarch_fit": cfg.FIGARCH_FIT,
                    "figarch_truncation": cfg.FIGARCH_TRUNCATION},
        "dp": {
            "gamma": cfg.CRRA_GAMMA,
            "risk_free": cfg.RISK_FREE,
            "horizon": cfg.HORIZON,
            "grid_nodes": cfg.GRID_NODES,
            "grid_span": cfg.GRID_SPAN,
            "pi_search": cfg.PI_SEARCH,
            "golden_tol": cfg.GOLDEN_TOL,
            "quad_nodes": cfg.QUAD_NODES,
            "extrapolation_warn": cfg.EXTRAPOLATION_WARN,
            "leverage": cfg.LEVERAGE,
            "legs": list(cfg.DP_LEGS),
            "parameters": None,
        },
        "simulate": {"paths": cfg.SIM_PATHS, "initial_wealth": cfg.INITIAL_WEALTH,
                     "initial_regime": 0, "constant_arms": list(cfg.CONSTANT_ARMS),
                     "block_size": cfg.SIM_BLOCK_SIZE},
        "frontier": {"scenarios": cfg.SCENARIOS, "points": cfg.FRONTIER_POINTS,
                     "cvar_levels": list(cfg.CVAR_LEVELS), "max_assets": cfg.FRONTIER_MAX_ASSETS,
                     "risk_free": cfg.RISK_FREE, "ridge": cfg.RIDGE, "pg_max_iter": cfg.PG_MAX_ITER,
                     "pg_tol": cfg.PG_TOL, "nig_reference_draws": cfg.NIG_REFERENCE_DRAWS,
                     "qmle_max_iter": cfg.QMLE_MAX_ITER, "qmle_max_restarts": cfg.QMLE_MAX_RESTARTS},
        "synthetic": {"assets": cfg.SYNTHETIC_ASSETS, "horizon": cfg.SYNTHETIC_HORIZON,
                      "factor_share": cfg.SYNTHETIC_FACTOR_SHARE, "start": cfg.SYNTHETIC_START,
                      "leg": cfg.SYNTHETIC_LEG},
    }


def deep_merge(base, override):
    """Nested dict merge; keys unknown to base are rejected"""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in out:
            raise ConfigError(f"unknown config key: {key}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class RunConfig:
    seed: int
    output_dir: str
    workers: int
    blocks: Dict[str, dict]
    source_path: Optional[str] = None
    schema_version: int = cfg.CONFIG_SCHEMA_VERSION

    def __getitem__(self, block):
        return self.blocks[block]

    @classmethod
    def from_document(cls, document, source_path=None):
        if not isinstance(document, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(document) - TOP_LEVEL
        if unknown:
            raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
        version = document.get("schema_version")
        if version != cfg.CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"schema_version {version!r} not supported (expected {cfg.CONFIG_SCHEMA_VERSION})")
        merged = deep_merge(default_document(), document)
        base_dir = os.path.dirname(os.path.abspath(source_path)) if source_path else os.getcwd()
        for key in INPUT_KEYS:
            value = merged["inputs"].get(key)
            if value and not os.path.isabs(value):
                merged["inputs"][key] = os.path.normpath(os.path.join(base_dir, value))
        return cls(
            seed=int(merged["seed"]),
            output_dir=str(merged["output_dir"]),
            workers=int(merged["workers"]),
            blocks={b: merged[b] for b in BLOCKS},
            source_path=source_path,
            schema_version=version,
        )

    @classmethod
    def load(cls, path):
        """Read, merge over defaults and resolve relative input paths against the file's directory"""
        if not os.path.exists(path):
            raise ConfigError(f"Config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})")
        return cls.from_document(document, source_path=path)

    @classmethod
    def defaults(cls):
        return cls.from_document({"schema_version": cfg.CONFIG_SCHEMA_VERSION})

    def apply_overrides(self, env=None, out=None, seed=None, workers=None):
        """Environment values override the file; explicit arguments override both"""
        env = os.environ if env is None else env
        if env.get("MOMENTUM_OUT_DIR"):
            self.output_dir = env["MOMENTUM_OUT_DIR"]
        if env.get("MOMENTUM_SEED"):
            self.seed = _int(env["MOMENTUM_SEED"], "MOMENTUM_SEED")
        if env.get("MOMENTUM_WORKERS"):
            self.workers = _int(env["MOMENTUM_WORKERS"], "MOMENTUM_WORKERS")
        if out is not None:
            self.output_dir = out
        if seed is not None:
            self.seed = int(seed)
        if workers is not None:
            self.workers = int(workers)
        return self

    def to_document(self):
        doc = {"schema_version": self.schema_version, "seed": self.seed, "output_dir": self.output_dir,
               "workers": self.workers}
        doc.update(copy.deepcopy(self.blocks))
        return doc

    def input_paths(self):
        return {k: v for k, v in self["inputs"].items() if v}

    def inputs_hash(self):
        """SHA-256 over the canonical config and the bytes of every input file"""
        digest = hashlib.sha256(json.dumps(self.to_document(), sort_keys=True).encode("utf-8"))
        for key, path in sorted(self.input_paths().items()):
            digest.update(key.encode("utf-8"))
            with open(path, "rb") as f:
                digest.update(f.read())
        return digest.hexdigest()

    # ------------------------------------------
    # VALIDATION
    # ------------------------------------------
    def validate(self):
        """Build every module type from its block so invariants fail before any computation"""
        from src.data_model import CsvSchema, MissingPolicy
        from src.dp_allocator import UtilitySpec
        from src.momentum_engine import RebalanceSchedule, SelectionRule
        from src.risk_metrics import ConfidenceLevel, RatioSpec

        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for key, path in self.input_paths().items():
            if not os.path.exists(path):
                raise DataError(f"File not found: {path}")
        if self["inputs"].get("prices") and self["inputs"].get("returns"):
            raise ConfigError("give either inputs.prices or inputs.returns, not both")

        CsvSchema(self["data"]["date_column"], None, MissingPolicy.parse(self["data"]["missing_policy"]))

        pca = self["pca"]
        if int(pca["components"]) < 1:
            raise ConfigError("pca.components must be >= 1")
        if pca["universe"] not in ("factors", "assets"):
            raise ConfigError(f"pca.universe must be 'factors' or 'assets', got {pca['universe']!r}")

        bt = self["backtest"]
        specs = [RatioSpec.parse(r) for r in bt["ratios"]]
        if not specs:
            raise ConfigError("backtest.ratios is empty")
        for spec in specs:
            SelectionRule(spec, float(bt["quantile"]))
        for pair in bt["schemes_weeks"]:
            if len(pair) != 2:
                raise ConfigError(f"scheme {pair!r} must be [formation_weeks, holding_weeks]")
            RebalanceSchedule.from_weeks(pair[0], pair[1], int(bt["days_per_week"]))
        [RatioSpec.parse(r) for r in bt["rolling_ratios"]]
        if bt["turnover_cap"] is not None and float(bt["turnover_cap"]) < 0:
            raise ConfigError("backtest.turnover_cap must be >= 0")
        if float(bt["cost_bps"]) < 0:
            raise ConfigError("backtest.cost_bps must be >= 0")
        if int(bt["rolling_window"]) < 2:
            raise ConfigError("backtest.rolling_window must be >= 2")

        rg = self["regimes"]
        if rg["source"] not in ("bundled", "labels", "hmm"):
            raise ConfigError(f"regimes.source must be bundled, labels or hmm, got {rg['source']!r}")
        if int(rg["figarch_truncation"]) < 50:
            raise ConfigError("regimes.figarch_truncation must be >= 50")

        dp = self["dp"]
        UtilitySpec(float(dp["gamma"]), float(dp["risk_free"]))
        if int(dp["horizon"]) < 1:
            raise ConfigError("dp.horizon must be >= 1")
        if int(dp["grid_nodes"]) < 16:
            raise ConfigError("dp.grid_nodes must be >= 16")
        if int(dp["pi_search"]) < 2 or int(dp["quad_nodes"]) < 1:
            raise ConfigError("dp.pi_search must be >= 2 and dp.quad_nodes >= 1")
        legs = [leg for leg in dp["legs"] if leg not in ("winners", "losers", "momentum")]
        if legs:
            raise ConfigError(f"unknown dp legs: {legs}")

        sim = self["simulate"]
        if int(sim["paths"]) < 1 or float(sim["initial_wealth"]) <= 0:
            raise ConfigError("simulate.paths must be >= 1 and initial_wealth > 0")
        if sim["initial_regime"] not in (0, 1):
            raise ConfigError("simulate.initial_regime must be 0 or 1")
        if any(not 0.0 <= float(a) <= 1.0 for a in sim["constant_arms"]):
            raise ConfigError("simulate.constant_arms must lie in [0, 1]")

        fr = self["frontier"]
        if int(fr["scenarios"]) < cfg.MIN_SCENARIOS:
            raise ConfigError(f"frontier.scenarios must be >= {cfg.MIN_SCENARIOS}")
        for level in fr["cvar_levels"]:
            ConfidenceLevel(level)
            if int(fr["scenarios"]) * (1.0 - float(level)) < 1.0:
                raise ConfigError(f"frontier.scenarios too small for CVaR level {level}")

        syn = self["synthetic"]
        if int(syn["assets"]) < 2 or int(syn["horizon"]) < 2:
            raise ConfigError("synthetic.assets and synthetic.horizon must be >= 2")
        if not 0.0 <= float(syn["factor_share"]) <= 1.0:
            raise ConfigError("synthetic.factor_share must lie in [0, 1]")
        log.log("config", f"Validated config (seed {self.seed}, output {self.output_dir})", 'SUCCESS')
        return self


def _int(value, name):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
