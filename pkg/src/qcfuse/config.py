"""Flat key=value configuration file mirroring the model, tier, and cost
settings, plus runtime knobs.

Keys are dotted with their section (``model.n_layers = 4``); blank lines and
``#`` comments are ignored. The QCFUSE_CONFIG environment variable names the
default file for every CLI command.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from qcfuse.model import ModelConfig
from qcfuse.pipeline import CostModel
from qcfuse.store import DEFAULT_ANCHOR_RATIO, TierConfig

ENV_VAR = "QCFUSE_CONFIG"


@dataclass
class RuntimeConfig:
    anchor_ratio: float = DEFAULT_ANCHOR_RATIO
    chunk_tokens: int = 64
    top_k: int = 4
    max_new: int = 32
    replay_ms: int = 200  # server event-stream pacing per pipeline stage


@dataclass
class AppConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    tier: TierConfig = field(default_factory=TierConfig)
    cost: CostModel = field(default_factory=CostModel)
    run: RuntimeConfig = field(default_factory=RuntimeConfig)

    def __post_init__(self):
        self.cost.tier = self.tier

    def dumps(self) -> str:
        lines = ["# qcfuse configuration (key = value)"]
        for key, value in sorted(self.model.to_dict().items()):
            lines.append(f"model.{key} = {value}")
        lines.append(f"tier.ssd_base_latency = {self.tier.ssd_base_latency}")
        lines.append(f"tier.ssd_bandwidth = {self.tier.ssd_bandwidth}")
        lines.append(f"tier.anchors_resident = {str(self.tier.anchors_resident).lower()}")
        lines.append(f"cost.compute_alpha = {self.cost.compute_alpha}")
        lines.append(f"cost.compute_beta = {self.cost.compute_beta}")
        lines.append(f"cost.decode_gamma = {self.cost.decode_gamma}")
        for key in ("anchor_ratio", "chunk_tokens", "top_k", "max_new", "replay_ms"):
            lines.append(f"run.{key} = {getattr(self.run, key)}")
        return "\n".join(lines) + "\n"

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.dumps())


_INT_KEYS = {"n_layers", "n_heads", "d_model", "d_head", "d_ff", "vocab_size",
             "seed", "critical_layer", "chunk_tokens", "top_k", "max_new", "replay_ms"}
_BOOL_KEYS = {"anchors_resident"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in _BOOL_KEYS:
        return raw.lower() in ("1", "true", "yes", "on")
    if key in _INT_KEYS:
        return int(raw)
    return float(raw)


def load_config(path: Path | str | None = None) -> AppConfig:
    """Read a config file; fall back to $QCFUSE_CONFIG, then defaults."""
    if path is None:
        env = os.environ.get(ENV_VAR)
        if not env:
            return AppConfig()
        path = env
    sections: dict[str, dict] = {"model": {}, "tier": {}, "cost": {}, "run": {}}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"bad config line (expected key = value): {line!r}")
        section, _, name = key.strip().partition(".")
        if section not in sections or not name:
            raise ValueError(f"unknown config key: {key.strip()!r}")
        sections[section][name] = _parse_value(name, value)

    model = ModelConfig(**sections["model"]) if sections["model"] else ModelConfig()
    tier = TierConfig(**sections["tier"]) if sections["tier"] else TierConfig()
    cost_kwargs = sections["cost"]
    cost = CostModel(tier=tier, **cost_kwargs)
    run = RuntimeConfig(**sections["run"]) if sections["run"] else RuntimeConfig()
    return AppConfig(model=model, tier=tier, cost=cost, run=run)
