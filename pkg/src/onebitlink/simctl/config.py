"""Run configuration: JSON in, validated dataclass out, embedded back into results."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from ..process import DEFAULT_DEPTH, PatternKind, make_pattern
from ..waveforms import DEFAULT_RESOLUTION

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    pattern: str = "uniform"
    n: int = 4
    lam: float = 0.25
    kappa: int = 3
    T_N: float = 1.0
    alpha: float = 0.0
    eta: float = 0.95
    energy: float = 1.0
    snr_db: tuple[float, ...] = (25.0,)
    m: int | None = 64
    seed: int = 0
    depth: int = DEFAULT_DEPTH
    resolution: int = DEFAULT_RESOLUTION
    pad: int = 16
    # sweep grids
    alphas: tuple[float, ...] = (0.0,)
    m_halves: tuple[int, ...] = (32,)
    kappas: tuple[int, ...] = (3,)
    n_values: tuple[int, ...] = (2, 3, 4, 5, 6)
    etas: tuple[float, ...] = (0.9, 0.95)
    random_subsets: int = 20
    max_half: int = 64
    # coding
    code_n: int = 1024
    code_k: int = 832
    col_weight: int = 3
    code_seed: int = 0
    outer_iterations: int = 5
    decoder_iterations: int = 50
    interleaved: bool = True
    labeling: str = "proposed"
    feedback: str = "consistent"
    label_cap: int = 3628800
    greedy_labeling: bool = False
    max_frame_errors: int = 100
    max_frames: int = 100_000
    batch_frames: int = 100
    out_dir: str = "out"

    def __post_init__(self):
        for name in ("snr_db", "alphas", "m_halves", "kappas", "n_values", "etas"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        try:
            kind = PatternKind(self.pattern)
            make_pattern(kind, self.n, self.lam if kind is PatternKind.NONUNIFORM else None)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        checks = [
            (self.kappa >= 1, "kappa must be >= 1"),
            (self.T_N > 0, "T_N must be positive"),
            (0.0 <= self.alpha <= 1.0, "alpha must lie in [0, 1]"),
            (all(0.0 <= a <= 1.0 for a in self.alphas), "alphas must lie in [0, 1]"),
            (0.0 < self.eta < 1.0, "eta must lie in (0, 1)"),
            (all(0.0 < e < 1.0 for e in self.etas), "etas must lie in (0, 1)"),
            (self.energy > 0, "energy must be positive"),
            (len(self.snr_db) > 0, "snr_db grid is empty"),
            (self.m is None or (self.m >= 2 and self.m % 2 == 0), "m must be an even number >= 2"),
            (all(h >= 1 for h in self.m_halves) and self.max_half >= 1, "m_halves and max_half must be positive"),
            (all(k >= 1 for k in self.kappas), "kappas must be positive"),
            (all(v >= 1 for v in self.n_values), "n_values must be positive"),
            (self.depth >= 1 and self.resolution >= 2 and self.pad >= 1, "numerics must be positive"),
            (0 < self.code_k < self.code_n, "code rate must lie in (0, 1)"),
            (self.col_weight >= 2, "column weight must be >= 2"),
            (self.outer_iterations >= 1 and self.decoder_iterations >= 1, "iteration counts must be positive"),
            (self.labeling in ("proposed", "random"), "labeling must be 'proposed' or 'random'"),
            (self.feedback in ("consistent", "swapped"), "feedback must be 'consistent' or 'swapped'"),
            (self.max_frame_errors >= 1 and self.max_frames >= 1 and self.batch_frames >= 1, "frame limits must be positive"),
            (self.kappa * self.n <= 20, "kappa*n must be <= 20 for an enumerable output alphabet"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @property
    def kind(self) -> PatternKind:
        return PatternKind(self.pattern)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def replace(self, **kw) -> "SimConfig":
        return dataclasses.replace(self, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known - {"schema_version"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if d.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {d['schema_version']}")
        try:
            return cls(**{k: v for k, v in d.items() if k in known})
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def load(cls, path: str | Path) -> "SimConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)


def embed(cfg: SimConfig, payload: dict) -> dict:
    """Attach the resolved config and its digest to a result payload."""
    return {"schema_version": SCHEMA_VERSION, "config": cfg.to_dict(), "config_digest": cfg.digest(), **payload}


# field names in flag form, for the CLI
FIELDS = [f for f in dataclasses.fields(SimConfig)]
