"""Checkpoint container and the stage registry.

Checkpoints are single binary files: a fixed header carrying the config
hash, then named float32 parameter blocks. Loading refuses a checkpoint
whose recorded config hash differs from the caller's.

The registry records, per pipeline stage, the checkpoint path, the config
hash and a parameter checksum. It enforces the stage DAG

    identity -> content -> emotion -> backbone -> tia -> sca -> mba -> infer

so out-of-order training is an error, never silent.
"""

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np
import torch
from filelock import FileLock

from .errors import DataFormatError, InvariantError

MAGIC = b"EFCK"
VERSION = 1

STAGE_ORDER = ["identity", "content", "emotion", "backbone", "tia", "sca", "mba", "infer"]


def _write_str(fh, s: str):
    data = s.encode()
    fh.write(struct.pack("<I", len(data)))
    fh.write(data)


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise DataFormatError("truncated checkpoint file")
    return data


def _read_str(fh) -> str:
    (n,) = struct.unpack("<I", _read_exact(fh, 4))
    if n > 1 << 20:
        raise DataFormatError("implausible string length in checkpoint")
    return _read_exact(fh, n).decode()


def save_checkpoint(path, stage: str, config_hash: str, blocks: dict) -> None:
    """Write named float32 arrays to a checkpoint file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        _write_str(fh, stage)
        _write_str(fh, config_hash)
        fh.write(struct.pack("<I", len(blocks)))
        for name, arr in blocks.items():
            arr = np.ascontiguousarray(arr, dtype=np.float32)
            _write_str(fh, name)
            fh.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(arr.astype("<f4").tobytes())


def load_checkpoint(path, expect_config_hash: str | None = None):
    """Read a checkpoint, returning (stage, config_hash, blocks)."""
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise DataFormatError(f"bad checkpoint magic in {path}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != VERSION:
            raise DataFormatError(f"unsupported checkpoint version {version}")
        stage = _read_str(fh)
        config_hash = _read_str(fh)
        if expect_config_hash is not None and config_hash != expect_config_hash:
            raise InvariantError(
                f"checkpoint {path} was trained under config {config_hash[:12]}..., "
                f"expected {expect_config_hash[:12]}..."
            )
        (n_blocks,) = struct.unpack("<I", _read_exact(fh, 4))
        blocks = {}
        for _ in range(n_blocks):
            name = _read_str(fh)
            (rank,) = struct.unpack("<I", _read_exact(fh, 4))
            dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank)) if rank else ()
            count = int(np.prod(dims)) if dims else 1
            data = np.frombuffer(_read_exact(fh, 4 * count), dtype="<f4")
            blocks[name] = data.reshape(dims).copy()
    return stage, config_hash, blocks


def module_blocks(module: torch.nn.Module) -> dict:
    """Named float32 blocks for a torch module's state dict."""
    return {
        name: tensor.detach().cpu().to(torch.float32).numpy()
        for name, tensor in module.state_dict().items()
    }


def load_module_blocks(module: torch.nn.Module, blocks: dict, prefix: str = "") -> None:
    state = {}
    want = module.state_dict()
    for name, ref in want.items():
        key = prefix + name
        if key not in blocks:
            raise DataFormatError(f"checkpoint missing parameter block {key!r}")
        state[name] = torch.from_numpy(np.asarray(blocks[key])).to(ref.dtype).reshape(ref.shape)
    module.load_state_dict(state)


def blocks_checksum(blocks: dict) -> str:
    h = hashlib.sha256()
    for name in sorted(blocks):
        h.update(name.encode())
        h.update(np.ascontiguousarray(blocks[name], dtype="<f4").tobytes())
    return h.hexdigest()


def module_checksum(module: torch.nn.Module) -> str:
    return blocks_checksum(module_blocks(module))


class CheckpointRegistry:
    """File-backed record of which stages were trained, with what."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.path = self.root / "registry.json"
        self._lock = FileLock(str(self.root / "registry.lock"))

    @classmethod
    def from_env(cls) -> "CheckpointRegistry":
        root = os.environ.get("ECHOFACE_HOME") or os.path.join(os.path.expanduser("~"), ".echoface")
        return cls(root)

    def _read(self) -> dict:
        if not self.path.is_file():
            return {}
        try:
            return json.loads(self.path.read_text())
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"corrupt registry file {self.path}") from exc

    def record(self, stage: str, ckpt_path, config_hash: str, checksum: str) -> None:
        if stage not in STAGE_ORDER:
            raise InvariantError(f"unknown stage {stage!r}")
        with self._lock:
            data = self._read()
            data[stage] = {
                "path": str(Path(ckpt_path).resolve()),
                "config_hash": config_hash,
                "checksum": checksum,
            }
            self.path.write_text(json.dumps(data, indent=2, sort_keys=True))

    def entry(self, stage: str) -> dict:
        data = self._read()
        if stage not in data:
            raise InvariantError(f"stage {stage!r} has no recorded checkpoint")
        return data[stage]

    def has(self, stage: str) -> bool:
        return stage in self._read()

    def check_order(self, stage: str, config_hash: str) -> None:
        """Require every predecessor of `stage` recorded under the same config."""
        if stage not in STAGE_ORDER:
            raise InvariantError(f"unknown stage {stage!r}")
        data = self._read()
        for earlier in STAGE_ORDER[: STAGE_ORDER.index(stage)]:
            if earlier not in data:
                raise InvariantError(
                    f"stage {stage!r} invoked before {earlier!r} was trained"
                )
            if data[earlier]["config_hash"] != config_hash:
                raise InvariantError(
                    f"stage {earlier!r} was trained under a different config"
                )

    def verify_frozen(self, stage: str, module: torch.nn.Module) -> None:
        """Assert a loaded module still matches its recorded checksum."""
        recorded = self.entry(stage)["checksum"]
        actual = module_checksum(module)
        if recorded != actual:
            raise InvariantError(
                f"frozen stage {stage!r} parameters changed (checksum mismatch)"
            )
