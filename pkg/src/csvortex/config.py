"""Run-configuration parsing and validation.

Configurations are JSON with an explicit schema_version key.  Lengths are in
the model's dimensionless units (the symmetry-breaking scale is normalized
away by the coupling rescaling).  Parsing failures carry the offending line
or field so the command line can report them precisely.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .background import VortexSet
from .errors import ConfigError
from .fields import GridDomain
from .model import ModelParams

SCHEMA_VERSION = 1

DEFAULTS = {
    "lambda_bg": 10.0,
    "tol": 1e-8,
    "max_iter": 4000,
    "plane_grid": 512,
    "torus_grid": 256,
    "box_target_decay": 25.0,   # auto half-width: m*L >= 25
    "lam_t": None,              # solver default 4*alpha*beta
    "path_nodes": 17,
    "separation": 1e-3,
    "seed": "zero",
    "quantized_tol_plane": 0.02,
    "quantized_tol_torus": 0.01,
    "residual_tol": 1e-6,
}


@dataclass(frozen=True)
class RunOpts:
    tol: float = DEFAULTS["tol"]
    max_iter: int = DEFAULTS["max_iter"]
    seed: str = DEFAULTS["seed"]
    second_solution: bool = False
    lam_t: Optional[float] = None
    path_nodes: int = DEFAULTS["path_nodes"]
    separation: float = DEFAULTS["separation"]
    quantized_tol: Optional[float] = None
    residual_tol: float = DEFAULTS["residual_tol"]
    out_dir: str = "."


@dataclass(frozen=True)
class RunConfig:
    mode: str                       # "plane" | "torus"
    params: ModelParams
    vortices: VortexSet
    domain: GridDomain
    opts: RunOpts
    decay_center: Tuple[float, float] = (0.0, 0.0)

    @property
    def quantized_tol(self) -> float:
        if self.opts.quantized_tol is not None:
            return self.opts.quantized_tol
        return DEFAULTS["quantized_tol_plane" if self.mode == "plane"
                        else "quantized_tol_torus"]


def _require(cfg: dict, key: str, where: str):
    if key not in cfg:
        raise ConfigError(f"missing field {key!r} in {where}")
    return cfg[key]


def _auto_half_width(params: ModelParams, vortices: VortexSet) -> float:
    spread = 0.0
    for pts in vortices.species:
        for x, y, _ in pts:
            spread = max(spread, abs(x), abs(y))
    l_decay = DEFAULTS["box_target_decay"] / params.decay_mass
    return max(l_decay, 4.0 * spread / 3.0 + 2.0)


def load_config(path: str, overrides: Optional[dict] = None) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed config {path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return parse_config(raw, overrides or {})


def parse_config(raw: dict, overrides: Optional[dict] = None) -> RunConfig:
    overrides = overrides or {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    version = _require(raw, "schema_version", "config root")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (need {SCHEMA_VERSION})")
    mode = _require(raw, "mode", "config root")
    if mode not in ("plane", "torus"):
        raise ConfigError(f"mode must be 'plane' or 'torus', got {mode!r}")

    p = _require(raw, "params", "config root")
    try:
        params = ModelParams(
            alpha=float(_require(p, "alpha", "params")),
            beta=float(_require(p, "beta", "params")),
            species=int(p.get("species", 1)),
            lambda_bg=float(p.get("lambda_bg", DEFAULTS["lambda_bg"])),
            sigma=float(p.get("sigma", 2.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid params block: {exc}") from exc

    vraw = raw.get("vortices", [])
    per_species: List[List[Tuple[float, float, int]]] = [[] for _ in range(params.species)]
    for k, entry in enumerate(vraw):
        try:
            s = int(entry.get("species", 0))
            pt = (float(entry["x"]), float(entry["y"]), int(entry.get("multiplicity", 1)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid vortices[{k}]: {exc}") from exc
        if not 0 <= s < params.species:
            raise ConfigError(
                f"vortices[{k}].species = {s} out of range 0..{params.species - 1}")
        per_species[s].append(pt)
    vortices = VortexSet(tuple(tuple(pts) for pts in per_species))

    d = raw.get("domain", {})
    kind = d.get("kind", "box" if mode == "plane" else "torus")
    if mode == "plane" and kind != "box":
        raise ConfigError("plane mode requires a box domain")
    if mode == "torus" and kind != "torus":
        raise ConfigError("torus mode requires a torus domain")
    grid_override = overrides.get("grid")
    if kind == "box":
        n = int(grid_override or d.get("n", DEFAULTS["plane_grid"]))
        half = d.get("half_width")
        half = float(half) if half is not None else _auto_half_width(params, vortices)
        domain = GridDomain.box(half, n)
    else:
        periods = d.get("periods", [2.0 * math.pi, 2.0 * math.pi])
        if not (isinstance(periods, list) and len(periods) == 2):
            raise ConfigError("domain.periods must be a two-element list")
        nn = d.get("n", [DEFAULTS["torus_grid"], DEFAULTS["torus_grid"]])
        if isinstance(nn, int):
            nn = [nn, nn]
        if grid_override:
            nn = [int(grid_override), int(grid_override)]
        domain = GridDomain.torus(float(periods[0]), float(periods[1]),
                                  int(nn[0]), int(nn[1]))
    vortices.validate_in(domain)

    o = raw.get("opts", {})
    opts = RunOpts(
        tol=float(overrides.get("tol") or o.get("tol", DEFAULTS["tol"])),
        max_iter=int(overrides.get("max_iter") or o.get("max_iter", DEFAULTS["max_iter"])),
        seed=str(overrides.get("seed") or o.get("seed", DEFAULTS["seed"])),
        second_solution=bool(overrides.get("second_solution",
                                           o.get("second_solution", False))),
        lam_t=(None if o.get("lam_t") is None else float(o["lam_t"])),
        path_nodes=int(o.get("path_nodes", DEFAULTS["path_nodes"])),
        separation=float(o.get("separation", DEFAULTS["separation"])),
        quantized_tol=(None if o.get("quantized_tol") is None
                       else float(o["quantized_tol"])),
        residual_tol=float(o.get("residual_tol", DEFAULTS["residual_tol"])),
        out_dir=str(overrides.get("out") or o.get("out_dir", ".")),
    )
    if opts.seed not in ("zero", "tarantello"):
        raise ConfigError(f"opts.seed must be 'zero' or 'tarantello', got {opts.seed!r}")
    if mode == "torus":
        params.require_torus_mode()
    center = raw.get("decay_center", [0.0, 0.0])
    return RunConfig(mode, params, vortices, domain, opts,
                     (float(center[0]), float(center[1])))


def resolve_out_dir(opts: RunOpts) -> str:
    """Output directory, overridable through the environment."""
    env = os.environ.get("CSVORTEX_OUT")
    out = env if env else opts.out_dir
    os.makedirs(out, exist_ok=True)
    return out
