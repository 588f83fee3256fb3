"""Flat ``key = value`` experiment configuration.

Format
------
* one ``key = value`` per line; ``#`` starts a comment;
* list values separate items with ``;`` (numbers may also use ``,``);
* ``include = other.cfg`` reads another file first (relative to the including
  file); keys given later override earlier ones, so a sweep file can include a
  base file and change a single key.

Recognised keys and defaults are in :data:`DEFAULTS`.
"""
import os
from dataclasses import dataclass, field

from .geometry import parse_domain
from .levelset import FOUR_PI, TOL_ISO
from .sturm import N_GRID, N_MAX

BETA_STAR_REFERENCE = 3.84754

DEFAULTS = {
    "domains": "disk:1",
    "betas": "1.0",
    "h": "0.05",
    "n_levels": "200",
    "n_grid": str(N_GRID),
    "n_max": str(N_MAX),
    "beta_star": str(BETA_STAR_REFERENCE),
    "tol_iso": str(TOL_ISO),
    "conv_tol": "0.01",
    # beta-star
    "tol": "1e-5",
    "bracket": "1; 8",
    "table_betas": "0.25; 0.5; 0.75; 1; 2; 3; 3.5; 3.8; 3.9; 4; 5; 6",
    # convergence
    "h_levels": "0.1; 0.05; 0.025",
    "grid_levels": "1000; 2000; 4000; 8000",
    # monotonicity
    "pairs": "4pi | 8pi",
    "a_star": "pi",
    "n_z": "11",
    "truncation_n": "30",
    # mesh-export
    "refine": "0",
}


class ConfigError(ValueError):
    pass


def _read(path, seen):
    path = os.path.abspath(path)
    if path in seen:
        raise ConfigError(f"include cycle through {path}")
    seen = seen | {path}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "include":
            out.update(_read(os.path.join(os.path.dirname(path), value), seen))
        elif key not in DEFAULTS:
            raise ConfigError(f"{path}:{num}: unknown key '{key}'")
        else:
            out[key] = value
    return out


def parse_number(text):
    """Float with an optional ``pi`` factor: ``4pi``, ``8.5 pi``, ``pi``."""
    t = text.strip().lower().replace(" ", "")
    try:
        if t.endswith("pi"):
            head = t[:-2]
            return (float(head) if head else 1.0) * FOUR_PI / 4.0
        return float(t)
    except ValueError as exc:
        raise ConfigError(f"not a number: '{text}'") from exc


def _items(text, allow_comma=False):
    if allow_comma:
        text = text.replace(",", ";")
    return [s.strip() for s in text.split(";") if s.strip()]


def _numbers(text):
    return [parse_number(s) for s in _items(text, allow_comma=True)]


@dataclass(frozen=True)
class ExperimentConfig:
    domains: tuple
    betas: tuple
    h: tuple
    n_levels: int
    n_grid: int
    n_max: int
    beta_star: float
    tol_iso: float
    conv_tol: float
    tol: float
    bracket: tuple
    table_betas: tuple
    h_levels: tuple
    grid_levels: tuple
    pairs: tuple
    a_star: float
    n_z: int
    truncation_n: int
    refine: int
    raw: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, values):
        v = dict(DEFAULTS)
        v.update(values)
        try:
            domains = tuple(parse_domain(s) for s in _items(v["domains"]))
            pairs = []
            for item in _items(v["pairs"]):
                if "|" not in item:
                    raise ConfigError(f"pair '{item}' must be 'G0 | G1'")
                pairs.append(tuple(s.strip() for s in item.split("|", 1)))
            cfg = cls(
                domains=domains,
                betas=tuple(_numbers(v["betas"])),
                h=tuple(_numbers(v["h"])),
                n_levels=int(v["n_levels"]),
                n_grid=int(v["n_grid"]),
                n_max=int(v["n_max"]),
                beta_star=parse_number(v["beta_star"]),
                tol_iso=parse_number(v["tol_iso"]),
                conv_tol=parse_number(v["conv_tol"]),
                tol=parse_number(v["tol"]),
                bracket=tuple(_numbers(v["bracket"])),
                table_betas=tuple(_numbers(v["table_betas"])),
                h_levels=tuple(_numbers(v["h_levels"])),
                grid_levels=tuple(int(x) for x in _numbers(v["grid_levels"])),
                pairs=tuple(pairs),
                a_star=parse_number(v["a_star"]),
                n_z=int(v["n_z"]),
                truncation_n=int(v["truncation_n"]),
                refine=int(v["refine"]),
                raw=v,
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if len(cfg.bracket) != 2:
            raise ConfigError("bracket needs two numbers")
        if any(b < 0 for b in cfg.betas):
            raise ConfigError("betas must be nonnegative")
        if any(x <= 0 for x in cfg.h + cfg.h_levels):
            raise ConfigError("mesh sizes must be positive")
        return cfg

    def describe(self):
        return "\n".join(f"{k} = {self.raw[k]}" for k in sorted(self.raw))


def load_config(path=None):
    return ExperimentConfig.from_dict(_read(path, frozenset()) if path else {})
