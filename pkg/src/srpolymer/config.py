"""Experiment configuration files.

Configs are INI files read with :mod:`configparser`: flat ``key = value``
lines grouped in typed sections. Lists are comma separated. Example::

    [experiment]
    kind = gamma-fit
    seed = 20240611

    [model]
    alpha = 1.5
    beta = 1.0
    h = 1.0, 0.0
    n = 16, 32, 64, 128, 256

    [mcmc]
    n_sweeps = 21000
    burn_in = 1000

Sections: ``experiment`` (kind, seed, name), ``model`` (alpha or
coupling_table, beta, h, v, n), ``mcmc`` (McmcPlan fields) and one optional
section named after the kind for kind-specific options.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .couplings import CouplingSpec
from .errors import ParameterError
from .ising import ISING_ENUMERATION_CAP
from .montecarlo import McmcPlan
from .polymer import WALK_ENUMERATION_CAP

KINDS = ("enumerate", "msd-scan", "gamma-fit", "ballistic-check", "clt-test", "pressure-scan", "oracle-suite")
MC_KINDS = ("msd-scan", "gamma-fit", "ballistic-check", "clt-test")


class ConfigError(ParameterError):
    """The config file is malformed or fails validation."""


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a list of numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _vectors(text: str) -> list[tuple[float, float]]:
    """``"1,0 | 0,1"`` -> [(1, 0), (0, 1)]."""
    out = []
    for part in text.split("|"):
        v = _floats(part)
        if len(v) != 2:
            raise ConfigError(f"expected 2-vectors separated by '|', got {text!r}")
        out.append((v[0], v[1]))
    return out


def _table(text: str) -> dict[int, float]:
    table = {}
    for item in text.split(","):
        if not item.strip():
            continue
        try:
            r, v = item.split(":")
            table[int(r)] = float(v)
        except ValueError as exc:
            raise ConfigError(f"coupling_table entries look like 'r:value', got {item!r}") from exc
    return table


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    name: str
    couplings: CouplingSpec
    alphas: list[float]
    betas: list[float]
    drifts: list[tuple[float, float]]
    directions: list[tuple[float, float]]
    n_list: list[int]
    plan: McmcPlan | None
    options: dict[str, str] = field(default_factory=dict)
    source_text: str = ""

    def coupling_for(self, alpha: float | None) -> CouplingSpec:
        return self.couplings if alpha is None else CouplingSpec.power_law(alpha)

    @property
    def drift(self) -> tuple[float, float]:
        return self.drifts[0]

    @property
    def direction(self) -> tuple[float, float]:
        return self.directions[0]

    def option(self, key: str, default: str) -> str:
        return self.options.get(key, default)

    def option_float(self, key: str, default: float) -> float:
        try:
            return float(self.options.get(key, default))
        except ValueError as exc:
            raise ConfigError(f"option {key!r} must be a number") from exc

    def option_int(self, key: str, default: int) -> int:
        v = self.option_float(key, default)
        if v != int(v):
            raise ConfigError(f"option {key!r} must be an integer")
        return int(v)

    def option_bool(self, key: str, default: bool) -> bool:
        raw = self.options.get(key)
        if raw is None:
            return default
        if raw.lower() in ("1", "yes", "true", "on"):
            return True
        if raw.lower() in ("0", "no", "false", "off"):
            return False
        raise ConfigError(f"option {key!r} must be a boolean")


def canonical_text(parser: configparser.ConfigParser) -> str:
    lines = []
    for section in sorted(parser.sections()):
        lines.append(f"[{section}]")
        for key in sorted(parser[section]):
            lines.append(f"{key} = {' '.join(parser[section][key].split())}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(cfg.source_text.encode("utf-8")).hexdigest()


def load_config(path: str | Path, seed: int | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if seed is not None:
        if not parser.has_section("experiment"):
            parser.add_section("experiment")
        parser["experiment"]["seed"] = str(seed)
    return parse_config(parser)


def parse_config(parser: configparser.ConfigParser) -> ExperimentConfig:
    if not parser.has_section("experiment") or not parser.has_section("model"):
        raise ConfigError("config needs [experiment] and [model] sections")
    exp, model = parser["experiment"], parser["model"]
    kind = exp.get("kind", "").strip()
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}")
    try:
        seed = int(exp.get("seed", "0"))
    except ValueError as exc:
        raise ConfigError("seed must be an integer") from exc
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")

    if "coupling_table" in model and "alpha" in model:
        raise ConfigError("give either alpha or coupling_table, not both")
    if "coupling_table" in model:
        alphas: list[float] = []
        couplings = CouplingSpec.from_table(_table(model["coupling_table"]))
    elif "alpha" in model:
        alphas = _floats(model["alpha"])
        if not alphas or any(a <= 0 for a in alphas):
            raise ConfigError("alpha must be > 0")
        couplings = CouplingSpec.power_law(alphas[0])
    else:
        raise ConfigError("[model] needs alpha or coupling_table")

    betas = _floats(model.get("beta", ""))
    if not betas or any(b <= 0 for b in betas):
        raise ConfigError("[model] beta must list values > 0")
    drifts = _vectors(model.get("h", "0, 0"))
    directions = _vectors(model.get("v", "1, 0"))
    n_list = _ints(model.get("n", ""))
    if not n_list or any(n < 1 for n in n_list):
        raise ConfigError("[model] n must list positive integers")

    plan = None
    if parser.has_section("mcmc"):
        m = parser["mcmc"]
        try:
            plan = McmcPlan(
                n_sweeps=int(m.get("n_sweeps", "11000")),
                burn_in=int(m.get("burn_in", "1000")),
                thinning=int(m.get("thinning", "1")),
                n_replicas=int(m.get("n_replicas", "4")),
                seed=seed,
                batch_count=int(m.get("batch_count", "32")),
                init=m.get("init", "random").strip(),
                check_every=int(m.get("check_every", "1000")),
            )
        except ValueError as exc:
            raise ConfigError(f"[mcmc] {exc}") from exc
    options = dict(parser[kind]) if parser.has_section(kind) else {}
    cfg = ExperimentConfig(kind, seed, exp.get("name", kind), couplings, alphas, betas, drifts, directions,
                           n_list, plan, options, canonical_text(parser))
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Check every precondition the experiment will rely on before any compute starts."""
    alphas = cfg.alphas or [None]
    n_max = max(cfg.n_list)
    if cfg.kind in MC_KINDS and cfg.plan is None:
        raise ConfigError(f"{cfg.kind} needs an [mcmc] section")
    if cfg.kind in ("enumerate", "oracle-suite") and n_max > WALK_ENUMERATION_CAP:
        raise ConfigError(f"{cfg.kind} enumerates walks; N={n_max} exceeds the cap of {WALK_ENUMERATION_CAP}")
    if cfg.kind in ("msd-scan", "gamma-fit", "ballistic-check", "clt-test"):
        for a in alphas:
            try:
                cfg.coupling_for(a).require_positive(n_max)
            except ParameterError as exc:
                raise ConfigError(str(exc)) from exc
    if cfg.kind == "gamma-fit":
        if len(cfg.n_list) < 3 or any(b <= a for a, b in zip(cfg.n_list, cfg.n_list[1:])):
            raise ConfigError("gamma-fit needs at least 3 strictly increasing N values")
        if cfg.option_bool("coupling_sum_check", True):
            for a in alphas:
                if a is None or a <= 1:
                    raise ConfigError(
                        f"coupling_sum_check needs power-law couplings with alpha > 1 (sum is O(N) only then); got alpha={a}"
                    )
    if cfg.kind == "ballistic-check" and len(cfg.n_list) < 3:
        raise ConfigError("ballistic-check needs at least 3 N values")
    if cfg.kind in ("pressure-scan", "clt-test"):
        for a in alphas:
            if not cfg.coupling_for(a).summable:
                raise ConfigError("pressure and CLT need summable couplings (alpha > 1 or finite table)")
    if cfg.kind == "pressure-scan":
        spec = cfg.coupling_for(alphas[0])
        if not spec.is_nearest_neighbor and n_max > ISING_ENUMERATION_CAP:
            raise ConfigError(f"pressure-scan with long-range couplings needs N <= {ISING_ENUMERATION_CAP}")
        step = cfg.option_float("step", 0.02)
        if not 0 < step <= 0.1:
            raise ConfigError("pressure-scan step must lie in (0, 0.1]")
    if cfg.kind == "clt-test":
        if cfg.option_int("n_samples", 2000) < 500:
            raise ConfigError("clt-test needs n_samples >= 500")
        method = cfg.option("variance", "mc-pressure")
        if method not in ("mc-pressure", "extrapolated"):
            raise ConfigError("clt-test variance must be 'mc-pressure' or 'extrapolated'")
        if cfg.option_float("lattice_spacing", 0.0) < 0:
            raise ConfigError("clt-test lattice_spacing must be >= 0")
