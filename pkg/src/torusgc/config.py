"""Run configuration: plain key=value files, CLI overrides, stable hash."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from . import problem as pb
from . import spectral as sp


@dataclass
class RunConfig:
    family: str = "cosine:0.5"
    n: int = 128
    lam: float = 0.1
    schedule: str = "geo:0.02:0.5:0.7"
    points: str = "0.9,0.99,0.999"
    grad_tol: float = 1e-8
    c_tol: float = 1e-10
    res_tol: float = 1e-5
    max_iters: int = 2000
    escalate: bool = True
    n_cap: int = 512
    sigma: float = 1.0
    R: float = 4.0
    n_rays: int = 8
    n_radii: int = 64
    regime_ratio: float = 0.2
    peak_min: float = 0.5
    h_samples: int = 8
    dealias_pad: int = 2
    out: str = "out"
    warm_start: str = ""
    seed: int = 0

    def validate(self):
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"n = {self.n} is not a power of two >= 16")
        if min(self.grad_tol, self.c_tol, self.res_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1 or self.h_samples < 1:
            raise ValueError("iteration counts must be positive")
        if not 0.0 < self.sigma <= 1.0:
            raise ValueError("sigma must lie in (0, 1]")
        if self.R <= 0 or self.n_rays < 1 or self.n_radii < 2:
            raise ValueError("profile sampling parameters out of range")
        return self


_BOOL = {"true": True, "1": True, "yes": True,
         "false": False, "0": False, "no": False}


def _coerce(kind, raw):
    if kind is bool:
        if isinstance(raw, bool):
            return raw
        v = _BOOL.get(str(raw).strip().lower())
        if v is None:
            raise ValueError(f"not a boolean: {raw!r}")
        return v
    return kind(raw)


def load_config(path=None, overrides=None) -> RunConfig:
    """Config from an optional key=value file plus override mapping.

    File format: one `key = value` per line, `#` starts a comment.
    Unknown keys are an error, not a warning; sweeps are scripted and a
    typo must fail loudly.
    """
    cfg = RunConfig()
    kinds = {f.name: type(getattr(cfg, f.name)) for f in fields(cfg)}
    data = {}
    if path:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key = value")
                key, _, raw = line.partition("=")
                data[key.strip()] = raw.strip()
    for key, raw in (overrides or {}).items():
        if raw is not None:
            data[key] = raw
    for key, raw in data.items():
        if key not in kinds:
            raise ValueError(f"unknown config key {key!r}")
        setattr(cfg, key, _coerce(kinds[key], raw))
    return cfg.validate()


def config_hash(cfg: RunConfig) -> str:
    # the hash names the experiment, not the destination folder
    canon = "\n".join(f"{f.name}={getattr(cfg, f.name)!r}"
                      for f in sorted(fields(cfg), key=lambda f: f.name)
                      if f.name != "out")
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def config_dict(cfg: RunConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


def parse_family(text: str) -> pb.F0Family:
    kind, _, rest = text.partition(":")
    if kind == "cosine":
        return pb.cosine(float(rest))
    if kind == "multibump":
        bumps = []
        for part in rest.split(";"):
            cx, cy, a = part.split(",")
            bumps.append((float(cx), float(cy), float(a)))
        return pb.multibump(bumps)
    if kind == "tabulated":
        return pb.tabulated(rest)
    raise ValueError(f"unknown family {text!r}")


def build_from_config(cfg: RunConfig) -> pb.Problem:
    family = parse_family(cfg.family)
    grid = sp.Grid(cfg.n)
    return pb.build_problem(family, grid)
