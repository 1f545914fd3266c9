"""Experiment configuration: flat key-value files with dotted keys.

Format
------
One ``key = value`` pair per line, ``#`` comments and blank lines ignored::

    model = contextual
    n_trials = 10000
    seed = 42
    settings = s0, s1
    setting.s0.a = 0
    setting.s0.b = 45
    setting.s1.a = 0, 0, 1
    setting.s1.b = 90
    contextual.epsilon = 0.05

Directions are a single planar angle in degrees (measured from +z in the
x-z plane) or three comma-separated vector components.  Angles are
converted once at parse time.  With ``angle_convention = photon`` every
planar angle is doubled before conversion (polarizer angles live on a
half-circle); vector-form settings are rejected under that convention
because the doubling map is defined on angles only.

Model-specific keys (``contextual.*``, ``lrhv.*``) are accepted only for
the matching model, so a stale key in a hand-edited file fails loudly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .contextual import PROFILES
from .directions import UNIT_TOL, Direction
from .errors import ConfigError

MODEL_CHOICES = ("quantum", "contextual", "lrhv")
ANGLE_CONVENTIONS = ("spin", "photon")
ENSEMBLE_CHOICES = ("sphere", "atoms")
RESPONSE_CHOICES = ("deterministic-sign", "linear-stochastic")
ORDER_CHOICES = ("iid", "blocked", "shuffled")

_MAX_SEED = (1 << 64) - 1
_ID_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-.")

_TOP_KEYS = ("model", "n_trials", "seed", "out", "angle_convention", "settings")
_CONTEXTUAL_KEYS = (
    "contextual.epsilon",
    "contextual.eta_a",
    "contextual.eta_b",
    "contextual.profile",
    "contextual.sigma",
)
_LRHV_KEYS = ("lrhv.ensemble", "lrhv.response", "lrhv.order")


def parse_flat_config(text: str, source: str = "<config>") -> Dict[str, str]:
    """Parse flat key-value text into an ordered mapping of raw strings."""
    out: Dict[str, str] = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, eq, value = stripped.partition("=")
        if not eq:
            raise ConfigError(f"{source}:{lineno}", f"expected 'key = value', got {line!r}")
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}", "empty key")
        if key in out:
            raise ConfigError(key, f"duplicate key at {source}:{lineno}")
        out[key] = value.strip()
    return out


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {raw!r}") from None


def _parse_float(key: str, raw: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(key, f"must be finite, got {raw!r}")
    return v


def _parse_choice(key: str, raw: str, choices) -> str:
    if raw not in choices:
        raise ConfigError(key, f"expected one of {', '.join(choices)}; got {raw!r}")
    return raw


def _vector_direction(key: str, comps) -> Direction:
    v = np.asarray(comps, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if abs(n - 1.0) <= UNIT_TOL:
        return Direction(v)
    if not math.isfinite(n) or n < 1e-300:
        raise ConfigError(key, "vector must be non-zero and finite")
    return Direction.from_vector(v)


def _parse_direction(key: str, raw: str, angle_convention: str) -> Direction:
    fields = [f.strip() for f in raw.split(",")]
    if len(fields) == 1:
        angle = _parse_float(key, fields[0])
        if angle_convention == "photon":
            angle = 2.0 * angle
        return Direction.from_polar_deg(angle)
    if len(fields) == 3:
        if angle_convention == "photon":
            raise ConfigError(key, "vector directions are not allowed with angle_convention = photon")
        return _vector_direction(key, [_parse_float(key, f) for f in fields])
    raise ConfigError(key, f"expected 1 (planar angle) or 3 (vector) fields, got {len(fields)}")


def _check_id(key: str, setting_id: str) -> str:
    if not setting_id:
        raise ConfigError(key, "empty id")
    bad = set(setting_id) - _ID_CHARS
    if bad:
        raise ConfigError(key, f"id {setting_id!r} contains unsupported characters {sorted(bad)}")
    return setting_id


@dataclass(frozen=True)
class SettingSpec:
    """One coincidence setting: an id plus the two analyzer directions."""

    setting_id: str
    a: Direction
    b: Direction

    def __post_init__(self):
        _check_id("setting", self.setting_id)
        for name, d in (("a", self.a), ("b", self.b)):
            if not isinstance(d, Direction):
                raise ConfigError(f"setting.{self.setting_id}.{name}", "must be a Direction")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description (directions, not raw angles)."""

    model: str
    n_trials: int
    settings: Tuple[SettingSpec, ...]
    seed: Optional[int] = None
    out: Optional[str] = None
    epsilon: float = 0.05
    eta_a: float = 1.0
    eta_b: float = 1.0
    profile: str = "uniform"
    sigma: Optional[float] = None
    ensemble: str = "sphere"
    atoms: Tuple[Tuple[Direction, int], ...] = ()
    response: str = "deterministic-sign"
    order: str = "iid"

    def __post_init__(self):
        if self.model not in MODEL_CHOICES:
            raise ConfigError("model", f"expected one of {', '.join(MODEL_CHOICES)}; got {self.model!r}")
        if not isinstance(self.n_trials, int) or self.n_trials < 1:
            raise ConfigError("n_trials", f"must be an integer >= 1, got {self.n_trials!r}")
        if self.seed is not None and not (0 <= int(self.seed) <= _MAX_SEED):
            raise ConfigError("seed", f"must lie in [0, 2**64), got {self.seed!r}")
        settings = tuple(self.settings)
        if not settings:
            raise ConfigError("settings", "at least one setting is required")
        seen = set()
        for s in settings:
            if not isinstance(s, SettingSpec):
                raise ConfigError("settings", "entries must be SettingSpec instances")
            if s.setting_id in seen:
                raise ConfigError("settings", f"duplicate setting id {s.setting_id!r}")
            seen.add(s.setting_id)
        object.__setattr__(self, "settings", settings)
        if self.model == "contextual":
            if not 0.0 < self.epsilon < 2.0:
                raise ConfigError("contextual.epsilon", f"must lie in (0, 2), got {self.epsilon!r}")
            for name, eta in (("eta_a", self.eta_a), ("eta_b", self.eta_b)):
                if not 0.0 < eta <= 1.0:
                    raise ConfigError(f"contextual.{name}", f"must lie in (0, 1], got {eta!r}")
            if self.profile not in PROFILES:
                raise ConfigError("contextual.profile", f"expected one of {', '.join(PROFILES)}")
            if (self.profile == "gauss") != (self.sigma is not None):
                raise ConfigError("contextual.sigma", "required for the gauss profile and only then")
            if self.sigma is not None and not self.sigma > 0.0:
                raise ConfigError("contextual.sigma", f"must be positive, got {self.sigma!r}")
        if self.model == "lrhv":
            if self.ensemble not in ENSEMBLE_CHOICES:
                raise ConfigError("lrhv.ensemble", f"expected one of {', '.join(ENSEMBLE_CHOICES)}")
            if self.response not in RESPONSE_CHOICES:
                raise ConfigError("lrhv.response", f"expected one of {', '.join(RESPONSE_CHOICES)}")
            if self.order not in ORDER_CHOICES:
                raise ConfigError("lrhv.order", f"expected one of {', '.join(ORDER_CHOICES)}")
            atoms = tuple(self.atoms)
            if (self.ensemble == "atoms") != bool(atoms):
                raise ConfigError("lrhv.atom.0", "atom list is required for ensemble = atoms and only then")
            for k, (d, count) in enumerate(atoms):
                if not isinstance(d, Direction):
                    raise ConfigError(f"lrhv.atom.{k}", "direction must be a Direction")
                if not isinstance(count, int) or count < 1:
                    raise ConfigError(f"lrhv.atom.{k}", f"count must be an integer >= 1, got {count!r}")
            object.__setattr__(self, "atoms", atoms)

    @classmethod
    def from_mapping(cls, mapping: Dict[str, str], source: str = "<config>") -> "ExperimentConfig":
        get = mapping.get
        model = _parse_choice("model", get("model", ""), MODEL_CHOICES)
        convention = _parse_choice(
            "angle_convention", get("angle_convention", "spin"), ANGLE_CONVENTIONS
        )
        if "n_trials" not in mapping:
            raise ConfigError("n_trials", f"missing required key in {source}")
        n_trials = _parse_int("n_trials", mapping["n_trials"])
        seed = _parse_int("seed", mapping["seed"]) if "seed" in mapping else None
        out = mapping.get("out") or None

        if "settings" not in mapping:
            raise ConfigError("settings", f"missing required key in {source}")
        ids = [_check_id("settings", s.strip()) for s in mapping["settings"].split(",")]
        if len(set(ids)) != len(ids):
            raise ConfigError("settings", f"duplicate setting ids in {ids}")
        specs = []
        for sid in ids:
            ka, kb = f"setting.{sid}.a", f"setting.{sid}.b"
            for k in (ka, kb):
                if k not in mapping:
                    raise ConfigError(k, f"missing direction for setting {sid!r}")
            specs.append(
                SettingSpec(
                    sid,
                    _parse_direction(ka, mapping[ka], convention),
                    _parse_direction(kb, mapping[kb], convention),
                )
            )

        kwargs = {}
        atom_keys = sorted(k for k in mapping if k.startswith("lrhv.atom."))
        if model == "contextual":
            if "contextual.epsilon" in mapping:
                kwargs["epsilon"] = _parse_float("contextual.epsilon", mapping["contextual.epsilon"])
            if "contextual.eta_a" in mapping:
                kwargs["eta_a"] = _parse_float("contextual.eta_a", mapping["contextual.eta_a"])
            if "contextual.eta_b" in mapping:
                kwargs["eta_b"] = _parse_float("contextual.eta_b", mapping["contextual.eta_b"])
            if "contextual.profile" in mapping:
                kwargs["profile"] = _parse_choice("contextual.profile", mapping["contextual.profile"], PROFILES)
            if "contextual.sigma" in mapping:
                kwargs["sigma"] = _parse_float("contextual.sigma", mapping["contextual.sigma"])
        if model == "lrhv":
            if "lrhv.ensemble" in mapping:
                kwargs["ensemble"] = _parse_choice("lrhv.ensemble", mapping["lrhv.ensemble"], ENSEMBLE_CHOICES)
            if "lrhv.response" in mapping:
                kwargs["response"] = _parse_choice("lrhv.response", mapping["lrhv.response"], RESPONSE_CHOICES)
            if "lrhv.order" in mapping:
                kwargs["order"] = _parse_choice("lrhv.order", mapping["lrhv.order"], ORDER_CHOICES)
            atoms = []
            for k, key in enumerate(atom_keys):
                if key != f"lrhv.atom.{k}":
                    raise ConfigError(key, f"atom indices must be consecutive from 0; expected lrhv.atom.{k}")
                fields = [f.strip() for f in mapping[key].split(",")]
                if len(fields) == 2:
                    d = _parse_direction(key, fields[0], convention)
                elif len(fields) == 4:
                    if convention == "photon":
                        raise ConfigError(key, "vector atoms are not allowed with angle_convention = photon")
                    d = _vector_direction(key, [_parse_float(key, f) for f in fields[:3]])
                else:
                    raise ConfigError(key, f"expected 'angle, count' or 'x, y, z, count', got {len(fields)} fields")
                atoms.append((d, _parse_int(key, fields[-1])))
            kwargs["atoms"] = tuple(atoms)

        allowed = set(_TOP_KEYS)
        allowed.update(f"setting.{sid}.{side}" for sid in ids for side in ("a", "b"))
        if model == "contextual":
            allowed.update(_CONTEXTUAL_KEYS)
        if model == "lrhv":
            allowed.update(_LRHV_KEYS)
            allowed.update(atom_keys)
        unknown = sorted(set(mapping) - allowed)
        if unknown:
            raise ConfigError(unknown[0], f"unknown key (not applicable to model {model!r})")

        return cls(model=model, n_trials=n_trials, settings=tuple(specs), seed=seed, out=out, **kwargs)

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        return cls.from_mapping(parse_flat_config(text, source), source)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, seed=int(seed))

    def canonical_text(self) -> str:
        """Deterministic resolved rendering; the stored/hashed config form.

        Directions are written as exact float reprs of the resolved unit
        vectors, so parsing the canonical text reproduces this config
        bit-for-bit.  The output path is location, not experiment content,
        and is left out on purpose.
        """
        lines = [f"model = {self.model}", f"n_trials = {self.n_trials}"]
        if self.seed is not None:
            lines.append(f"seed = {self.seed}")
        lines.append(f"settings = {', '.join(s.setting_id for s in self.settings)}")
        for s in self.settings:
            for side, d in (("a", s.a), ("b", s.b)):
                comps = ", ".join(repr(float(c)) for c in d.vec)
                lines.append(f"setting.{s.setting_id}.{side} = {comps}")
        if self.model == "contextual":
            lines.append(f"contextual.epsilon = {self.epsilon!r}")
            lines.append(f"contextual.eta_a = {self.eta_a!r}")
            lines.append(f"contextual.eta_b = {self.eta_b!r}")
            lines.append(f"contextual.profile = {self.profile}")
            if self.sigma is not None:
                lines.append(f"contextual.sigma = {self.sigma!r}")
        if self.model == "lrhv":
            lines.append(f"lrhv.ensemble = {self.ensemble}")
            lines.append(f"lrhv.response = {self.response}")
            lines.append(f"lrhv.order = {self.order}")
            for k, (d, count) in enumerate(self.atoms):
                comps = ", ".join(repr(float(c)) for c in d.vec)
                lines.append(f"lrhv.atom.{k} = {comps}, {count}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return ExperimentConfig.from_text(text, source=str(path))
