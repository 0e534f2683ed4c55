"""Run configuration: flat dotted-key settings with a fixed schema.

The config is plain text, one `key = value` per line, `#` comments.
Unknown keys are rejected; value types are pinned by the defaults table.
The content hash is computed over a canonical serialization so it is
stable across platforms and across load/save round trips.
"""

import hashlib
from pathlib import Path

from .errors import ConfigError

# Every design-decision knob in one place. Types here are authoritative.
DEFAULTS = {
    # -- synthetic world -------------------------------------------------
    "world.image_size": 64,
    "world.d_audio": 80,
    "world.n_contents": 16,
    "world.n_emotions": 8,
    "world.train_identities": 64,
    "world.test_identities": 16,
    "world.clip_len": 32,
    "world.max_clip_len": 256,
    "world.dilate_radius": 2,
    "world.noise_sigma": 0.02,
    "world.map_seed": 0,
    "world.id_latent_dim": 12,
    "corpus.clips_per_id": 6,
    "corpus.test_clips_per_id": 4,
    # -- frozen toy experts ----------------------------------------------
    "lip.steps": 700,
    "lip.lr": 2e-3,
    "lip.batch": 16,
    "matting.steps": 350,
    "matting.lr": 2e-3,
    "matting.batch": 8,
    # -- progressive audio disentanglement -------------------------------
    "pad.d_model": 128,
    "pad.layers": 4,
    "pad.heads": 4,
    "pad.theta_dim": 512,
    "pad.tau": 0.1,
    "pad.lambda_reg": 0.1,
    "pad.lr": 2e-3,
    "pad.batch": 16,
    "pad.steps_identity": 800,
    "pad.steps_content": 700,
    "pad.steps_emotion": 700,
    # -- diffusion backbone ----------------------------------------------
    "diff.latent_channels": 4,
    "diff.t_train": 1000,
    "diff.schedule": "cosine",
    "diff.base_channels": 48,
    "diff.vae_base": 48,
    "diff.vae_steps": 1400,
    "diff.vae_lr": 2e-3,
    "diff.vae_batch": 16,
    "diff.kl_weight": 1e-6,
    "diff.d_txt": 128,
    "diff.text_layers": 2,
    "diff.text_heads": 4,
    "diff.max_prompt_len": 16,
    "diff.steps": 2400,
    "diff.lr": 1e-3,
    "diff.batch": 32,
    "diff.sample_steps": 50,
    "diff.eta": 0.0,
    # -- adapters ----------------------------------------------------------
    "tia.n_tokens": 8,
    "tia.hidden": 256,
    "tia.steps": 700,
    "tia.lr": 2e-3,
    "tia.batch": 32,
    "tia.prompt": "a high quality face photo",
    "tia.inputs": "pad",
    "sca.full_threshold": 0.8,
    "sca.steps": 1200,
    "sca.lr": 1e-3,
    "sca.batch": 16,
    "mba.kernel": 3,
    "mba.blend_layers": "highest",
    "mba.steps": 500,
    "mba.lr": 2e-3,
    "mba.batch": 8,
    "mba.perceptual_weight": 0.5,
    # -- inference ----------------------------------------------------------
    "infer.steps": 50,
    "infer.shared_noise": False,
    # -- evaluation probes ---------------------------------------------------
    "eval.probe_steps": 600,
    "eval.probe_lr": 2e-3,
    "eval.probe_batch": 16,
    "eval.age_bins": 4,
}


def _canon(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return str(value)


def _coerce(key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


class RunConfig:
    """Immutable-ish view over the flat settings dict."""

    def __init__(self, values=None):
        self._values = dict(DEFAULTS)
        if values:
            for key, val in values.items():
                self._set(key, val)

    def _set(self, key, value):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key: {key!r}")
        default = DEFAULTS[key]
        if isinstance(value, str) and not isinstance(default, str):
            value = _coerce(key, value, default)
        if isinstance(default, bool) != isinstance(value, bool):
            raise ConfigError(f"wrong type for {key!r}: {value!r}")
        if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, type(default)):
            raise ConfigError(f"wrong type for {key!r}: {value!r}")
        self._values[key] = value

    def __getitem__(self, key):
        if key not in self._values:
            raise ConfigError(f"unknown config key: {key!r}")
        return self._values[key]

    def get(self, key):
        return self[key]

    def with_overrides(self, overrides: dict) -> "RunConfig":
        cfg = RunConfig(self._values)
        for key, val in overrides.items():
            cfg._set(key, val)
        return cfg

    def to_text(self) -> str:
        lines = [f"{k} = {_canon(v)}" for k, v in sorted(self._values.items())]
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def items(self):
        return self._values.items()

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self._values == other._values


def parse_config_text(text: str) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        values[key.strip()] = raw.strip()
    return RunConfig(values)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(cfg.to_text())
