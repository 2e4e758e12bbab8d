from __future__ import annotations

import os
from dataclasses import dataclass, field

import yaml

from ..ecc import CurveId

ENV_PREFIX = "SPREADMENOT_"


@dataclass
class ServiceConfig:
    curve: str = CurveId.SECP256K1.value
    retention_days: float = 14.0
    listen: str = "127.0.0.1:8787"
    tokens: list[str] = field(default_factory=list)
    data: str | None = None  # append-only log path; None keeps everything in memory

    @property
    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen.rpartition(":")
        return host or "127.0.0.1", int(port)

    @classmethod
    def load(cls, path=None, env=None) -> ServiceConfig:
        """File values first, then ``SPREADMENOT_*`` environment overrides."""
        env = os.environ if env is None else env
        values = {}
        if path:
            with open(path) as fh:
                values = yaml.safe_load(fh) or {}
            unknown = set(values) - set(cls.__dataclass_fields__)
            if unknown:
                raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key in cls.__dataclass_fields__:
            raw = env.get(ENV_PREFIX + key.upper())
            if raw is None:
                continue
            if key == "tokens":
                values[key] = [t for t in raw.split(",") if t]
            elif key == "retention_days":
                values[key] = float(raw)
            else:
                values[key] = raw
        cfg = cls(**values)
        CurveId.parse(cfg.curve)
        return cfg
