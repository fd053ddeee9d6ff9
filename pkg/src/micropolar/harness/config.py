"""INI experiment configuration.

Example::

    [grid]
    dims = 32x32x32
    box = auto            # or e.g. 16pi,16pi,64pi

    [data]
    eps = 0.25
    eps_list = 0.125, 0.0625, 0.03125
    p = 5
    const_C = 1
    amp = large

    [time]
    dt = 1e-3
    t_end = 1
    dt_ladder = 4e-3, 2e-3, 1e-3
    scheme = strang-exact-linear
    stride = 10
    eta_mult = 10

    [output]
    dir = runs

    [random]
    seed = 20240501
"""

from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import asdict, dataclass
from pathlib import Path

from ..initial_data import default_box
from ..solver import SCHEME_ALIASES, SCHEMES, SUBSTEPS

OUT_ENV = "MPS_OUT"

DEFAULTS = {
    "grid": {"dims": "32x32x32", "box": "auto"},
    "data": {
        "eps": "0.25",
        "eps_list": "0.125, 0.0625, 0.03125, 0.015625, 0.0078125",
        "p": "5",
        "const_C": "1",
        "amp": "large",
    },
    "time": {
        "dt": "1e-3",
        "t_end": "1",
        "dt_ladder": "4e-3, 2e-3, 1e-3",
        "scheme": SCHEMES[0],
        "substep": "midpoint",
        "stride": "10",
        "eta_mult": "10",
    },
    "output": {"dir": "runs"},
    "random": {"seed": "20240501"},
}


class ConfigError(ValueError):
    pass


_LENGTH = re.compile(r"^\s*([0-9.eE+-]*)\s*(pi)?\s*$")


def parse_length(text):
    """'16pi' -> 16*pi, '2.5' -> 2.5, 'pi' -> pi."""
    m = _LENGTH.match(text)
    if not m or not (m.group(1) or m.group(2)):
        raise ConfigError(f"cannot parse length {text!r}")
    num = float(m.group(1)) if m.group(1) else 1.0
    return num * math.pi if m.group(2) else num


def parse_dims(text):
    parts = re.split(r"[xX,]", text.strip())
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}; expected N1xN2xN3") from None
    if len(dims) != 3 or any(n <= 0 or n % 2 for n in dims):
        raise ConfigError(f"grid {text!r} must be three positive even sizes")
    return dims


def parse_box(text, eps):
    """Box lengths; 'auto' picks the box that resolves the datum at this eps."""
    if text.strip().lower() == "auto":
        return default_box(eps)
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"box {text!r} needs three lengths")
    box = tuple(parse_length(p) for p in parts)
    if any(not (x > 0) for x in box):
        raise ConfigError(f"box lengths must be positive: {text!r}")
    return box


def parse_floats(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}") from None


def parse_amp(text):
    t = text.strip().lower()
    if t in ("large", "unit"):
        return t
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"amp must be 'large', 'unit' or a number, got {text!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    dims: tuple
    box: str
    eps: float
    eps_list: tuple
    p: float
    const_C: float
    amp: object
    dt: float
    t_end: float
    dt_ladder: tuple
    scheme: str
    substep: str
    stride: int
    eta_mult: float
    output_dir: str
    seed: int
    source: str = "<defaults>"

    def __post_init__(self):
        for e in (self.eps,) + tuple(self.eps_list):
            if not (0.0 < e <= 0.25):
                raise ConfigError(f"eps values must lie in (0, 1/4], got {e}")
        if not (4.0 < self.p < 6.0):
            raise ConfigError(f"p must lie in (4, 6), got {self.p}")
        if not (self.dt > 0 and self.t_end >= self.dt):
            raise ConfigError("need dt > 0 and t_end >= dt")
        if any(not (h > 0) for h in self.dt_ladder):
            raise ConfigError("dt_ladder entries must be positive")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.substep not in SUBSTEPS:
            raise ConfigError(f"substep must be one of {SUBSTEPS}")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")

    @property
    def box_lengths(self):
        return parse_box(self.box, self.eps)

    def output_root(self):
        """MPS_OUT overrides the configured output directory."""
        root = Path(os.environ.get(OUT_ENV) or self.output_dir)
        if root.exists() and not root.is_dir():
            raise ConfigError(f"output root {root} is not a directory")
        return root

    def as_dict(self):
        d = asdict(self)
        d.pop("source")
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_parser(cls, cp, source):
        def get(section, key):
            return cp.get(section, key)

        try:
            scheme = get("time", "scheme").strip()
            return cls(
                dims=parse_dims(get("grid", "dims")),
                box=get("grid", "box").strip(),
                eps=float(get("data", "eps")),
                eps_list=parse_floats(get("data", "eps_list")),
                p=float(get("data", "p")),
                const_C=float(get("data", "const_C")),
                amp=parse_amp(get("data", "amp")),
                dt=float(get("time", "dt")),
                t_end=float(get("time", "t_end")),
                dt_ladder=parse_floats(get("time", "dt_ladder")),
                scheme=SCHEME_ALIASES.get(scheme, scheme),
                substep=get("time", "substep").strip(),
                stride=int(get("time", "stride")),
                eta_mult=float(get("time", "eta_mult")),
                output_dir=get("output", "dir").strip(),
                seed=int(get("random", "seed")),
                source=source,
            )
        except (configparser.Error, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{source}: {exc}") from None

    @classmethod
    def default(cls):
        return cls.from_text("", "<defaults>")

    @classmethod
    def from_text(cls, text, source="<text>"):
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        cp.read_dict(DEFAULTS)
        try:
            cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        return cls.from_parser(cp, source)

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_text(path.read_text(), str(path))
