"""Run configuration: sectioned key/value files with flag overrides."""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, replace

from .analytics import DEFAULT_SEED
from .grid import DEFAULT_ORDER, DEFAULT_POINTS_PER_SEGMENT
from .limit import TAIL_FACTOR
from .potential import PotentialError, PotentialFamily
from .tuner import Target

DEFAULT_ELLS = tuple(0.2 * 2.0**-j for j in range(7))

_COMPLEX_RE = re.compile(
    r"^\s*(?P<re>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?"
    r"\s*(?:(?P<im>[+-]\s*(?:\d+\.?\d*|\.\d+)?(?:[eE][+-]?\d+)?)\s*[ij])?\s*$"
)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def parse_complex(text: str, key: str = "k") -> complex:
    """Parse ``re+imi`` syntax: ``0+2i``, ``2i``, ``1.5-0.25i``, ``3``."""
    s = text.strip().replace(" ", "")
    if re.fullmatch(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?[ij]", s):
        s = "0" + ("" if s[0] in "+-" else "+") + s
    m = _COMPLEX_RE.match(s)
    if not s or not m or (m.group("re") is None and m.group("im") is None):
        raise ConfigError(f"{key}: cannot parse complex number {text!r} (expected e.g. 0+2i)")
    re_part = float(m.group("re") or 0.0)
    im_txt = m.group("im")
    if im_txt is None:
        im_part = 0.0
    elif im_txt in "+-":
        im_part = float(im_txt + "1")
    else:
        im_part = float(im_txt)
    return complex(re_part, im_part)


def format_complex(k: complex) -> str:
    return f"{k.real!r}{'+' if math.copysign(1, k.imag) > 0 else '-'}{abs(k.imag)!r}i"


@dataclass(frozen=True)
class RunConfig:
    a_plus: float = 1.0
    c_plus: float = 1.0
    lam: float = 0.0
    c_minus: float = 2.0
    core_exp: float = 3.0
    well_exp: float = 2.0
    points_per_segment: int = DEFAULT_POINTS_PER_SEGMENT
    order: int = DEFAULT_ORDER
    tail_factor: float = TAIL_FACTOR
    ells: tuple[float, ...] = DEFAULT_ELLS
    ell: float = 1.0
    jobs: int = 1
    k: complex = 2j
    target_kind: str = "a"
    target_value: float = 1.0
    out: str = "sweep.csv"
    seed: int = DEFAULT_SEED

    def family(self) -> PotentialFamily:
        return PotentialFamily(self.a_plus, self.c_plus, self.lam, self.c_minus, self.core_exp, self.well_exp)

    def target(self) -> Target:
        return Target(self.target_kind, self.target_value)

    def validate(self) -> "RunConfig":
        try:
            self.family()
        except PotentialError as exc:
            raise ConfigError(f"[family]: {exc}") from exc
        checks = [
            (self.points_per_segment >= 4, "grid.points_per_segment", "must be >= 4"),
            (self.order >= 2, "grid.order", "must be >= 2"),
            (self.tail_factor > 0, "grid.tail_factor", "must be > 0"),
            (len(self.ells) > 0, "sweep.ells", "is empty"),
            (all(x > 0 for x in self.ells), "sweep.ells", "must be positive"),
            (all(b < a for a, b in zip(self.ells, self.ells[1:])), "sweep.ells", "must be strictly decreasing"),
            (self.ell > 0, "sweep.ell", "must be > 0"),
            (self.jobs >= 1, "sweep.jobs", "must be >= 1"),
            (self.k.imag > 0, "sweep.k", "needs Im k > 0"),
            (self.target_kind in ("a", "e"), "target.kind", "must be 'a' or 'e'"),
            (math.isfinite(self.target_value), "target.value", "must be finite"),
            (self.seed >= 0, "run.seed", "must be >= 0"),
        ]
        for ok, key, msg in checks:
            if not ok:
                raise ConfigError(f"{key} {msg}")
        return self


# (section, key) -> dataclass field, with parser and formatter
_FLOAT = (float, repr)
_INT = (int, str)
_SCHEMA = {
    ("family", "a_plus"): ("a_plus", *_FLOAT),
    ("family", "c_plus"): ("c_plus", *_FLOAT),
    ("family", "lambda"): ("lam", *_FLOAT),
    ("family", "c_minus"): ("c_minus", *_FLOAT),
    ("family", "core_exp"): ("core_exp", *_FLOAT),
    ("family", "well_exp"): ("well_exp", *_FLOAT),
    ("grid", "points_per_segment"): ("points_per_segment", *_INT),
    ("grid", "order"): ("order", *_INT),
    ("grid", "tail_factor"): ("tail_factor", *_FLOAT),
    ("sweep", "ells"): ("ells", lambda s: tuple(float(x) for x in s.split(",") if x.strip()),
                        lambda v: ", ".join(repr(x) for x in v)),
    ("sweep", "ell"): ("ell", *_FLOAT),
    ("sweep", "jobs"): ("jobs", *_INT),
    ("sweep", "k"): ("k", parse_complex, format_complex),
    ("target", "kind"): ("target_kind", str.strip, str),
    ("target", "value"): ("target_value", *_FLOAT),
    ("output", "out"): ("out", str.strip, str),
    ("run", "seed"): ("seed", *_INT),
}


def _convert(section: str, key: str, raw: str):
    try:
        name, parse, _ = _SCHEMA[(section, key)]
    except KeyError:
        raise ConfigError(f"{section}.{key}: unknown config key") from None
    try:
        return name, parse(raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}.{key}: invalid value {raw!r} ({exc})") from None


def apply_overrides(cfg: RunConfig, items: dict[str, str]) -> RunConfig:
    """Apply ``section.key -> raw string`` overrides."""
    changes = {}
    for dotted, raw in items.items():
        if "." not in dotted:
            raise ConfigError(f"{dotted}: override keys take the form section.key")
        section, key = dotted.split(".", 1)
        name, value = _convert(section.strip(), key.strip(), raw)
        changes[name] = value
    return replace(cfg, **changes)


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config file: {exc}") from None
    items = {f"{s}.{k}": v for s in cp.sections() for k, v in cp.items(s)}
    return apply_overrides(RunConfig(), items).validate()


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"--config: cannot read {path!r} ({exc.strerror})") from None


def emit_config(cfg: RunConfig) -> str:
    sections: dict[str, list[str]] = {}
    for (section, key), (name, _, fmt) in _SCHEMA.items():
        sections.setdefault(section, []).append(f"{key} = {fmt(getattr(cfg, name))}")
    return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in sections.items())


def config_dict(cfg: RunConfig) -> dict[str, str]:
    """Flat ``section.key -> formatted value`` view (for reports)."""
    return {f"{s}.{k}": fmt(getattr(cfg, name)) for (s, k), (name, _, fmt) in _SCHEMA.items()}

