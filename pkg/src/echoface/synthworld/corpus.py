"""Synthetic corpus: samples, on-disk layout, lazy rendering.

On disk a corpus is one `manifest.txt` (key=value per line) plus one
binary blob per array. Blobs are little-endian float32 with an 8-byte
header: the magic "EFW1" and a uint32 rank, followed by the dims.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataFormatError
from ..seeding import derive_seed, rng
from .render import render_background, render_mesh, render_textured
from .types import AudioFeatures, FaceCoefficients, IdentitySpec, UtteranceSpec
from .world import sample_identity, synth_utterance

BLOB_MAGIC = b"EFW1"

TEST_ID_OFFSET = 10_000
N_BACKGROUNDS = 32


def write_blob(path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(BLOB_MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        for d in arr.shape:
            fh.write(struct.pack("<I", d))
        fh.write(arr.tobytes())


def read_blob(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"blob not found: {path}")
    data = path.read_bytes()
    if data[:4] != BLOB_MAGIC:
        raise DataFormatError(f"bad blob magic in {path}")
    if len(data) < 8:
        raise DataFormatError(f"truncated blob header in {path}")
    (rank,) = struct.unpack("<I", data[4:8])
    if rank > 8:
        raise DataFormatError(f"implausible blob rank {rank} in {path}")
    dims = struct.unpack(f"<{rank}I", data[8: 8 + 4 * rank])
    count = int(np.prod(dims)) if dims else 1
    payload = data[8 + 4 * rank:]
    if len(payload) != 4 * count:
        raise DataFormatError(f"blob payload size mismatch in {path}")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


@dataclass
class CorpusSample:
    index: int
    identity: IdentitySpec
    utterance: UtteranceSpec
    noise_seed: int
    background_id: int
    appearance: np.ndarray  # per-clip; varies within one identity
    audio: AudioFeatures
    coeffs: FaceCoefficients
    split: str = "train"

    @property
    def length(self) -> int:
        return self.coeffs.length


@dataclass
class Corpus:
    cfg: object
    seed: int
    samples: list = field(default_factory=list)
    _cache: dict = field(default_factory=dict, repr=False)

    CACHE_LIMIT = 3072

    @property
    def train_samples(self):
        return [s for s in self.samples if s.split == "train"]

    @property
    def test_samples(self):
        return [s for s in self.samples if s.split == "test"]

    def clips_of_identity(self, id_label: int):
        return [s for s in self.samples if s.identity.id_label == id_label]

    # -- rendering ---------------------------------------------------------
    def render_frame(self, sample: CorpusSample, t: int):
        key = (sample.index, t)
        frame = self._cache.get(key)
        if frame is None:
            frame = render_textured(self.cfg, sample.coeffs.alpha, sample.coeffs.beta[t],
                                    sample.coeffs.pose[t], sample.appearance,
                                    sample.background_id)
            if len(self._cache) >= self.CACHE_LIMIT:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = frame
        return frame

    def render_mesh_frame(self, sample: CorpusSample, t: int):
        return render_mesh(self.cfg, sample.coeffs.alpha, sample.coeffs.beta[t],
                           sample.coeffs.pose[t])

    def background(self, sample: CorpusSample):
        return render_background(self.cfg, sample.background_id)

    # -- construction --------------------------------------------------------
    @classmethod
    def build(cls, cfg, seed: int, n_train_ids: int | None = None,
              n_test_ids: int | None = None, clips_per_id: int | None = None,
              test_clips_per_id: int | None = None, clip_len: int | None = None) -> "Corpus":
        n_train_ids = cfg["world.train_identities"] if n_train_ids is None else n_train_ids
        n_test_ids = cfg["world.test_identities"] if n_test_ids is None else n_test_ids
        clips_per_id = cfg["corpus.clips_per_id"] if clips_per_id is None else clips_per_id
        test_clips = cfg["corpus.test_clips_per_id"] if test_clips_per_id is None else test_clips_per_id
        clip_len = cfg["world.clip_len"] if clip_len is None else clip_len

        corpus = cls(cfg=cfg, seed=seed)
        g = rng(seed, "corpus-build")
        index = 0
        plan = [("train", range(n_train_ids), clips_per_id),
                ("test", range(TEST_ID_OFFSET, TEST_ID_OFFSET + n_test_ids), test_clips)]
        for split, id_range, n_clips in plan:
            for id_seed in id_range:
                identity = sample_identity(cfg, id_seed)
                for j in range(n_clips):
                    utt = UtteranceSpec(
                        content_id=int(g.integers(cfg["world.n_contents"])),
                        emotion_id=int(g.integers(cfg["world.n_emotions"])),
                        length=clip_len,
                    )
                    noise_seed = derive_seed(seed, "clip", id_seed, j)
                    audio, coeffs = synth_utterance(cfg, identity, utt, noise_seed)
                    sample = CorpusSample(
                        index=index,
                        identity=identity,
                        utterance=utt,
                        noise_seed=noise_seed,
                        background_id=int(g.integers(N_BACKGROUNDS)),
                        appearance=g.standard_normal(16).astype(np.float32),
                        audio=AudioFeatures(
                            features=audio.features.astype(np.float32),
                            sample_meta=audio.sample_meta,
                        ),
                        coeffs=FaceCoefficients(
                            alpha=coeffs.alpha.astype(np.float32),
                            beta=coeffs.beta.astype(np.float32),
                            pose=coeffs.pose.astype(np.float32),
                        ),
                        split=split,
                    )
                    corpus.samples.append(sample)
                    index += 1
        return corpus

    # -- persistence -----------------------------------------------------------
    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = [f"count={len(self.samples)}", f"seed={self.seed}"]
        for s in self.samples:
            p = f"s{s.index:05d}"
            lines += [
                f"{p}.id_label={s.identity.id_label}",
                f"{p}.age={s.identity.age!r}",
                f"{p}.gender={s.identity.gender!r}",
                f"{p}.content_id={s.utterance.content_id}",
                f"{p}.emotion_id={s.utterance.emotion_id}",
                f"{p}.length={s.utterance.length}",
                f"{p}.noise_seed={s.noise_seed}",
                f"{p}.background_id={s.background_id}",
                f"{p}.split={s.split}",
            ]
            write_blob(out / f"{p}.audio.bin", s.audio.features)
            write_blob(out / f"{p}.alpha.bin", s.coeffs.alpha)
            write_blob(out / f"{p}.beta.bin", s.coeffs.beta)
            write_blob(out / f"{p}.pose.bin", s.coeffs.pose)
            write_blob(out / f"{p}.appearance.bin", s.appearance)
        (out / "manifest.txt").write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, cfg, in_dir) -> "Corpus":
        root = Path(in_dir)
        manifest = root / "manifest.txt"
        if not manifest.is_file():
            raise DataFormatError(f"manifest not found in {root}")
        kv = {}
        for line in manifest.read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise DataFormatError(f"bad manifest line: {line!r}")
            key, _, val = line.partition("=")
            kv[key] = val
        try:
            count = int(kv["count"])
            seed = int(kv["seed"])
        except (KeyError, ValueError) as exc:
            raise DataFormatError("manifest missing count/seed") from exc

        corpus = cls(cfg=cfg, seed=seed)
        for i in range(count):
            p = f"s{i:05d}"
            try:
                id_label = int(kv[f"{p}.id_label"])
                age = float(kv[f"{p}.age"])
                gender = float(kv[f"{p}.gender"])
                content_id = int(kv[f"{p}.content_id"])
                emotion_id = int(kv[f"{p}.emotion_id"])
                length = int(kv[f"{p}.length"])
                noise_seed = int(kv[f"{p}.noise_seed"])
                background_id = int(kv[f"{p}.background_id"])
                split = kv[f"{p}.split"]
            except (KeyError, ValueError) as exc:
                raise DataFormatError(f"manifest missing fields for sample {i}") from exc
            audio = read_blob(root / f"{p}.audio.bin")
            alpha = read_blob(root / f"{p}.alpha.bin")
            beta = read_blob(root / f"{p}.beta.bin")
            pose = read_blob(root / f"{p}.pose.bin")
            appearance = read_blob(root / f"{p}.appearance.bin")
            identity = IdentitySpec(
                id_label=id_label, alpha=alpha.astype(np.float64), age=age,
                gender=gender, appearance=appearance.astype(np.float64),
            )
            meta = {"id_label": id_label, "content_id": content_id, "emotion_id": emotion_id}
            corpus.samples.append(CorpusSample(
                index=i,
                identity=identity,
                utterance=UtteranceSpec(content_id, emotion_id, length),
                noise_seed=noise_seed,
                background_id=background_id,
                appearance=appearance,
                audio=AudioFeatures(features=audio, sample_meta=meta),
                coeffs=FaceCoefficients(alpha=alpha, beta=beta, pose=pose),
                split=split,
            ))
        return corpus
