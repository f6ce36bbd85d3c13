"""Run configuration: a single TOML document with flag overrides.

Defaults: coupling and ridge weights 0.01, Gaussian bandwidth 5.1, five
nearest neighbours, ten domains (five for venues), and kind-specific stream
fractions.
"""

import json
from dataclasses import asdict, dataclass, field, fields

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ValidationError
from .models import ALL_METHODS

KIND_DEFAULTS = {
    "paper": {"n_domains": 10, "initial": 0.001, "step": 0.001, "test": 0.10},
    "author": {"n_domains": 10, "initial": 0.002, "step": 0.002, "test": 0.10},
    "venue": {"n_domains": 5, "initial": 0.20, "step": 0.10, "test": 0.10},
}


@dataclass
class Config:
    corpus: str = ""
    workdir: str = "."
    kind: str = "paper"
    normalization: str = "log2"
    normalization_scale: float = 127.0
    year_min: int | None = None
    year_max: int | None = None
    corpus_end: int | None = None
    n_domains: int | None = None
    knn_k: int = 5
    seed: int = 0
    theta: float = 0.01
    lam: float = 0.01
    sigma: float = 5.1
    rank: int = 50
    method: str = "iball-fast"
    initial_fraction: float | None = None
    step_fraction: float | None = None
    test_fraction: float | None = None
    methods: list = field(
        default_factory=lambda: list(ALL_METHODS)
    )

    def __post_init__(self):
        if self.kind not in KIND_DEFAULTS:
            raise ValidationError(f"kind must be one of {sorted(KIND_DEFAULTS)}")
        defaults = KIND_DEFAULTS[self.kind]
        if self.n_domains is None:
            self.n_domains = defaults["n_domains"]
        if self.initial_fraction is None:
            self.initial_fraction = defaults["initial"]
        if self.step_fraction is None:
            self.step_fraction = defaults["step"]
        if self.test_fraction is None:
            self.test_fraction = defaults["test"]
        from .ingest import YEAR_WINDOWS

        lo, hi = YEAR_WINDOWS[self.kind]
        if self.year_min is None:
            self.year_min = lo
        if self.year_max is None:
            self.year_max = hi
        self._validate()

    def _validate(self):
        checks = [
            ("theta", self.theta >= 0),
            ("lam", self.lam > 0),
            ("sigma", self.sigma > 0),
            ("rank", self.rank >= 1),
            ("knn_k", self.knn_k >= 1),
            ("n_domains", self.n_domains >= 1),
            ("initial_fraction", 0 < self.initial_fraction < 1),
            ("step_fraction", 0 < self.step_fraction < 1),
            ("test_fraction", 0 < self.test_fraction < 1),
        ]
        for name, ok in checks:
            if not ok:
                raise ValidationError(f"config field {name} out of range")
        if self.method not in ALL_METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        bad = [m for m in self.methods if m not in ALL_METHODS]
        if bad:
            raise ValidationError(f"unknown methods in config: {bad}")
        if self.normalization not in ("log2", "linear"):
            raise ValidationError(f"unknown normalization {self.normalization!r}")

    def to_dict(self):
        return asdict(self)


# section.key -> Config field
_TOML_MAP = {
    ("paths", "corpus"): "corpus",
    ("paths", "workdir"): "workdir",
    ("data", "kind"): "kind",
    ("data", "normalization"): "normalization",
    ("data", "normalization_scale"): "normalization_scale",
    ("data", "year_min"): "year_min",
    ("data", "year_max"): "year_max",
    ("data", "corpus_end"): "corpus_end",
    ("partition", "n_domains"): "n_domains",
    ("partition", "knn"): "knn_k",
    ("partition", "seed"): "seed",
    ("model", "theta"): "theta",
    ("model", "lambda"): "lam",
    ("model", "sigma"): "sigma",
    ("model", "rank"): "rank",
    ("model", "method"): "method",
    ("split", "initial"): "initial_fraction",
    ("split", "step"): "step_fraction",
    ("split", "test"): "test_fraction",
    ("bench", "methods"): "methods",
}


def load_config(path, overrides=()):
    """Load a TOML config; ``overrides`` are ``section.key=value`` strings."""
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    kwargs = {}
    for (section, key), attr in _TOML_MAP.items():
        if section in doc and key in doc[section]:
            kwargs[attr] = doc[section][key]
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not of the form section.key=value")
        dotted, value = item.split("=", 1)
        parts = dotted.split(".")
        if len(parts) != 2 or tuple(parts) not in _TOML_MAP:
            raise ValidationError(f"unknown config key {dotted!r}")
        attr = _TOML_MAP[tuple(parts)]
        kwargs[attr] = _coerce(attr, value)
    return Config(**kwargs)


def _coerce(attr, value):
    hints = {f.name: f.type for f in fields(Config)}
    hint = str(hints.get(attr, "str"))
    if attr == "methods":
        return [v.strip() for v in value.split(",") if v.strip()]
    if "int" in hint:
        return int(value)
    if "float" in hint:
        return float(value)
    return value


def write_config_echo(path, config):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
