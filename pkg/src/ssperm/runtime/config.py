"""Session configuration shared byte-for-byte by the three parties.

The file is JSON with these keys (all optional except where noted)::

    {
      "mode": "local-sim" | "tcp",
      "addresses": {"p0": "127.0.0.1:7700", "p1": "127.0.0.1:7701", "p2": "127.0.0.1:7702"},
      "precision": 23,
      "seeds": {"p0p1": "<64 hex chars>", "p1p2": "<64 hex chars>"},
      "private_seeds": {"p0": "<hex>", "p1": "<hex>", "p2": "<hex>"},
      "clip_mode": "piggyback" | "eager",
      "data_seed": 0,
      "debug": false,
      "job": {...}          # what `ssperm party` runs, see ssperm.jobs
    }

Missing seeds are derived from ``data_seed`` with SHA-256, which is fine for
simulation and tests but not for deployment.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..sharing import PartyId

PAIR_KEYS = ("p0p1", "p1p2")
DEFAULT_ADDRESSES = {"p0": "127.0.0.1:7700", "p1": "127.0.0.1:7701", "p2": "127.0.0.1:7702"}


class ConfigError(ValueError):
    pass


def _derived_seed(label: str, data_seed: int) -> str:
    return hashlib.sha256(f"ssperm/{label}/{data_seed}".encode()).hexdigest()


@dataclass
class SessionConfig:
    mode: str = "local-sim"
    addresses: dict = field(default_factory=lambda: dict(DEFAULT_ADDRESSES))
    precision: int = 23
    seeds: dict = field(default_factory=dict)
    private_seeds: dict = field(default_factory=dict)
    clip_mode: str = "piggyback"
    data_seed: int = 0
    debug: bool = False
    job: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.mode not in ("local-sim", "tcp"):
            raise ConfigError(f"mode must be 'local-sim' or 'tcp', got {self.mode!r}")
        if self.clip_mode not in ("piggyback", "eager"):
            raise ConfigError(f"clip_mode must be 'piggyback' or 'eager', got {self.clip_mode!r}")
        if not 1 <= int(self.precision) <= 40:
            raise ConfigError("precision must be in [1, 40]")
        self.seeds = dict(self.seeds)
        for key in PAIR_KEYS:
            self.seeds.setdefault(key, _derived_seed(key, self.data_seed))
        self.private_seeds = dict(self.private_seeds)
        for role in ("p0", "p1", "p2"):
            self.private_seeds.setdefault(role, _derived_seed("private-" + role, self.data_seed))
        for name, value in list(self.seeds.items()) + list(self.private_seeds.items()):
            try:
                raw = bytes.fromhex(value)
            except (TypeError, ValueError):
                raise ConfigError(f"seed {name!r} is not hex") from None
            if len(raw) != 32:
                raise ConfigError(f"seed {name!r} must encode 32 bytes")

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "SessionConfig":
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @property
    def session_id(self) -> int:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return int.from_bytes(hashlib.sha256(canon).digest()[:4], "little")

    def pair_seed(self, key: str) -> bytes:
        return bytes.fromhex(self.seeds[key])

    def private_seed(self, role) -> bytes:
        return bytes.fromhex(self.private_seeds[PartyId.parse(role).name.lower()])

    def address(self, role) -> str:
        return self.addresses[PartyId.parse(role).name.lower()]
