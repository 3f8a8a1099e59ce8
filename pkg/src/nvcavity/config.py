"""Run configuration: a flat key-value format with [dotted.sections].

The syntax is a TOML subset (sections, ``key = value`` with numbers,
booleans, quoted strings and JSON-style arrays). Parsing is done here
rather than through a library so that every error carries a line number
and semantic errors carry the full key path, and so that serialization
round-trips bit-exactly for golden-file tests.
"""

import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError

_ANGULAR = "angular"
_ORDINARY = "ordinary"
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class _Key:
    type: type
    required: bool = False
    default: object = None
    minimum: float = None
    maximum: float = None
    choices: tuple = None
    exclusive_min: bool = True  # minimum is exclusive by default

    def validate(self, path, value):
        if self.type is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if self.type in (int, float) and isinstance(value, bool):
            raise ConfigError(f"key {path}: expected {self.type.__name__}, got a boolean")
        if not isinstance(value, self.type):
            raise ConfigError(
                f"key {path}: expected {self.type.__name__}, got {type(value).__name__}"
            )
        if self.minimum is not None:
            ok = value > self.minimum if self.exclusive_min else value >= self.minimum
            if not ok:
                op = ">" if self.exclusive_min else ">="
                raise ConfigError(f"key {path}: must be {op} {self.minimum}, got {value}")
        if self.maximum is not None and value > self.maximum:
            raise ConfigError(f"key {path}: must be <= {self.maximum}, got {value}")
        if self.choices is not None and value not in self.choices:
            raise ConfigError(f"key {path}: must be one of {self.choices}, got {value!r}")
        return value


_SCHEMA = {
    "units": {
        "convention": _Key(str, default=_ANGULAR, choices=(_ANGULAR, _ORDINARY)),
    },
    "emitter": {
        "peak_table": _Key(str, default="builtin:nv-default"),
        "peaks": _Key(list, default=None),
        "total_gamma_mhz": _Key(float, required=True, minimum=0.0),
        "gamma_star_thz": _Key(float, default=None, minimum=0.0, exclusive_min=False),
        "zpl_index": _Key(int, default=0, minimum=0, exclusive_min=False),
    },
    "coupling": {
        "g_zpl_ghz": _Key(float, required=True, minimum=0.0, exclusive_min=False),
    },
    "cavity": {
        "effective_length_um": _Key(float, required=True, minimum=0.0),
        "tune_nm": _Key(float, required=True, minimum=0.0),
        "finesse": _Key(float, default=None, minimum=0.0),
        "mode_number": _Key(int, default=None, minimum=0),
        "kappa_from": _Key(str, default="finesse", choices=("finesse", "losses")),
    },
    "losses": {
        "table": _Key(str, default="builtin:default"),
        "scatter_loss": _Key(float, default=0.0, minimum=0.0, maximum=0.999,
                             exclusive_min=False),
    },
    "pump": {
        "wavelength_nm": _Key(float, default=532.0, minimum=0.0),
        "visibility": _Key(float, default=0.0, minimum=0.0, maximum=1.0, exclusive_min=False),
        "phase_offset": _Key(float, default=0.0, minimum=None),
    },
    "photophysics": {
        "decay": _Key(float, required=True, minimum=0.0),
        "shelve": _Key(float, default=0.0, minimum=0.0, exclusive_min=False),
        "deshelve": _Key(float, default=0.0, minimum=0.0, exclusive_min=False),
        "pump_coefficient": _Key(float, default=None, minimum=0.0),
    },
    "saturation": {
        "rate": _Key(float, default=None, minimum=0.0),
        "power_mw": _Key(float, default=None, minimum=0.0),
    },
    "detection": {
        "efficiency": _Key(float, default=0.04, minimum=0.0, maximum=1.0),
        "mode_match": _Key(float, default=1.0, minimum=0.0, maximum=1.0, exclusive_min=False),
        "spatial_factor": _Key(float, default=0.01, minimum=0.0),
    },
    "sweep": {
        "gamma_star_min_ghz": _Key(float, default=1.0, minimum=0.0),
        "gamma_star_max_thz": _Key(float, default=100.0, minimum=0.0),
        "points": _Key(int, default=49, minimum=1),
        "lindblad_points": _Key(int, default=0, minimum=0, exclusive_min=False),
    },
    "tuning": {
        "n_long_min": _Key(int, default=9, minimum=0),
        "n_long_max": _Key(int, default=17, minimum=0),
        "lambda_min_nm": _Key(float, default=610.0, minimum=0.0),
        "lambda_max_nm": _Key(float, default=720.0, minimum=0.0),
        "points": _Key(int, default=200, minimum=2),
        "collection_exponent": _Key(float, default=0.0, minimum=None),
    },
    "lindblad": {
        "fock_cutoff": _Key(int, default=1, minimum=1, exclusive_min=False),
        "rtol": _Key(float, default=1e-9, minimum=0.0),
        "t_max_lifetimes": _Key(float, default=7.0, minimum=0.0),
        "points": _Key(int, default=200, minimum=2),
        "reduce_to_zpl": _Key(bool, default=True),
    },
    "output": {
        "directory": _Key(str, default="out"),
    },
}

_REQUIRED = [
    f"{sec}.{key}" for sec, keys in _SCHEMA.items() for key, spec in keys.items() if spec.required
]


def _parse_value(raw, lineno):
    raw = raw.strip()
    if not raw:
        raise ConfigError(f"line {lineno}: missing value")
    if raw.startswith("["):
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {lineno}: bad array syntax: {exc}") from None
    if raw.startswith('"') or raw.startswith("'"):
        quote = raw[0]
        if len(raw) < 2 or not raw.endswith(quote):
            raise ConfigError(f"line {lineno}: unterminated string")
        return raw[1:-1]
    if raw in ("true", "false"):
        return raw == "true"
    try:
        if any(c in raw for c in ".eE") and not raw.lstrip("+-").isdigit():
            return float(raw)
        return int(raw)
    except ValueError:
        raise ConfigError(
            f"line {lineno}: cannot parse value {raw!r} (strings need quotes)"
        ) from None


def _parse_text(text):
    """Raw text -> {section: {key: (value, lineno)}}."""
    sections = {}
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError(f"line {lineno}: unterminated section header")
            current = stripped[1:-1].strip()
            if not current:
                raise ConfigError(f"line {lineno}: empty section name")
            sections.setdefault(current, {})
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside of any [section]")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key {current}.{key}")
        sections[current][key] = (_parse_value(raw, lineno), lineno)
    return sections


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; values keep their config units.

    ``values`` maps 'section.key' to the parsed value; the convenience
    accessors convert to internal angular rad/s according to the units
    flag. ``base_dir`` anchors relative file references.
    """

    values: dict
    base_dir: str = "."
    source_path: str = None

    def get(self, path):
        return self.values[path]

    @property
    def rate_scale(self):
        """Multiplier taking quoted rate numbers to rad/s (beyond the SI prefix)."""
        return TWO_PI if self.values["units.convention"] == _ORDINARY else 1.0

    @property
    def total_gamma(self):
        return self.values["emitter.total_gamma_mhz"] * 1e6 * self.rate_scale

    @property
    def gamma_star(self):
        v = self.values["emitter.gamma_star_thz"]
        return None if v is None else v * 1e12 * self.rate_scale

    @property
    def g_zpl(self):
        return self.values["coupling.g_zpl_ghz"] * 1e9 * self.rate_scale

    @property
    def effective_length(self):
        return self.values["cavity.effective_length_um"] * 1e-6

    @property
    def tune_wavelength(self):
        return self.values["cavity.tune_nm"] * 1e-9

    def section(self, name):
        prefix = name + "."
        return {
            k[len(prefix):]: v for k, v in self.values.items() if k.startswith(prefix)
        }


def _validate(sections, base_dir, source_path):
    values = {}
    for sec_name, keys in sections.items():
        if sec_name not in _SCHEMA:
            lineno = min(ln for _, ln in keys.values()) if keys else "?"
            raise ConfigError(f"line {lineno}: unknown section [{sec_name}]")
        for key, (value, lineno) in keys.items():
            if key not in _SCHEMA[sec_name]:
                raise ConfigError(f"line {lineno}: unknown key {sec_name}.{key}")
            spec = _SCHEMA[sec_name][key]
            values[f"{sec_name}.{key}"] = spec.validate(f"{sec_name}.{key}", value)
    missing = [p for p in _REQUIRED if p not in values]
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(sorted(missing)))
    for sec_name, keys in _SCHEMA.items():
        for key, spec in keys.items():
            values.setdefault(f"{sec_name}.{key}", spec.default)

    if values["emitter.peaks"] is not None:
        peaks = values["emitter.peaks"]
        if not peaks or any(
            not (isinstance(row, list) and len(row) == 3) for row in peaks
        ):
            raise ConfigError(
                "key emitter.peaks: expected a non-empty array of [center_nm, fwhm_THz, area]"
            )
    if values["tuning.n_long_max"] < values["tuning.n_long_min"]:
        raise ConfigError("key tuning.n_long_max: must be >= tuning.n_long_min")
    if values["tuning.lambda_max_nm"] <= values["tuning.lambda_min_nm"]:
        raise ConfigError("key tuning.lambda_max_nm: must be > tuning.lambda_min_nm")
    if values["cavity.kappa_from"] == "finesse" and values["cavity.finesse"] is None:
        raise ConfigError("key cavity.finesse: required when cavity.kappa_from = \"finesse\"")
    return RunConfig(values=values, base_dir=base_dir, source_path=source_path)


def parse_config(path):
    """Parse and validate a config file; errors carry line or key-path info."""
    import os

    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = parse_config_text(text, base_dir=os.path.dirname(os.path.abspath(path)),
                            source_path=str(path))
    for key in ("emitter.peak_table", "losses.table"):
        ref = cfg.values[key]
        if ref and not ref.startswith("builtin:"):
            resolved = ref if os.path.isabs(ref) else os.path.join(cfg.base_dir, ref)
            if not os.path.exists(resolved):
                raise ConfigError(f"key {key}: referenced file {resolved} does not exist")
    return cfg


def parse_config_text(text, base_dir=".", source_path=None):
    return _validate(_parse_text(text), base_dir, source_path)


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.9g}"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, list):
        return json.dumps(value)
    raise ConfigError(f"cannot serialize value of type {type(value).__name__}")


def serialize_config(cfg):
    """Deterministic text form; parse(serialize(cfg)) == cfg."""
    lines = []
    for sec_name in _SCHEMA:
        keys = [
            (key, cfg.values[f"{sec_name}.{key}"])
            for key in _SCHEMA[sec_name]
            if cfg.values.get(f"{sec_name}.{key}") is not None
        ]
        if not keys:
            continue
        lines.append(f"[{sec_name}]")
        for key, value in keys:
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)
