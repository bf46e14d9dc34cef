"""Parameter delivery: the payload shipped from training to endpoints.

A model artifact is a single file carrying everything an inference device
needs: architecture, link configuration, an optional target Q-format, and
the float64 weights.  Weights are stored losslessly so one artifact serves
every bit-width study; quantization happens on load.  See FORMAT.md for
the byte-level layout.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autoencoder import AutoencoderModel
from .fixedpoint import QFormat, make_qformat, quantize
from .neuralnet import FCNet, DenseLayer, QuantizedNet, quantize_net
from .ofdmlink import OfdmConfig

MAGIC = b"FXLINK1\n"
VERSION = 1
_HASH_LEN = 32


class ArtifactError(ValueError):
    """Malformed or inconsistent artifact file."""


class ChecksumMismatch(ArtifactError):
    """Stored hash does not match file contents."""


class UnsupportedVersion(ArtifactError):
    pass


@dataclass
class ModelArtifact:
    header: dict
    payload: np.ndarray  # flat float64, little-endian on disk

    @classmethod
    def from_model(cls, model: AutoencoderModel, training: dict | None = None,
                   qformat: QFormat | None = None) -> "ModelArtifact":
        header = {
            "version": VERSION,
            "encoder_dims": model.encoder.dims,
            "decoder_dims": model.decoder.dims,
            "encoder_activations": [l.activation for l in
                                    model.encoder.layers],
            "decoder_activations": [l.activation for l in
                                    model.decoder.layers],
            "rate": model.rate,
            "n_subcarriers": model.ofdm.n_subcarriers,
            "cp_len": model.ofdm.cp_len,
            "modulation": model.ofdm.modulation,
            "sample_rate": model.ofdm.sample_rate,
            "qformat": None if qformat is None else
                       {"total_bits": qformat.total_bits,
                        "int_bits": qformat.int_bits},
            "training": training or {},
        }
        chunks = []
        for net in (model.encoder, model.decoder):
            for layer in net.layers:
                chunks.append(layer.w.reshape(-1))
                chunks.append(layer.b)
        payload = np.ascontiguousarray(np.concatenate(chunks),
                                       dtype=np.float64)
        return cls(header, payload)

    @property
    def qformat(self) -> QFormat | None:
        q = self.header.get("qformat")
        if q is None:
            return None
        return make_qformat(q["total_bits"], q["int_bits"])

    def expected_payload_len(self) -> int:
        n = 0
        for dims in (self.header["encoder_dims"],
                     self.header["decoder_dims"]):
            for din, dout in zip(dims[:-1], dims[1:]):
                n += din * dout + dout
        return n

    def to_model(self) -> AutoencoderModel:
        h = self.header
        ofdm_cfg = OfdmConfig(h["n_subcarriers"], h["cp_len"],
                              h["modulation"], h["sample_rate"])
        pos = 0

        def take(n):
            nonlocal pos
            out = self.payload[pos:pos + n]
            pos += n
            return out

        nets = []
        for dims, acts in ((h["encoder_dims"], h["encoder_activations"]),
                           (h["decoder_dims"], h["decoder_activations"])):
            layers = []
            for din, dout, act in zip(dims[:-1], dims[1:], acts):
                w = take(din * dout).reshape(dout, din).copy()
                b = take(dout).copy()
                layers.append(DenseLayer(w, b, act))
            nets.append(FCNet(layers))
        if pos != self.payload.size:
            raise ArtifactError("payload size does not match header dims")
        return AutoencoderModel(nets[0], nets[1], ofdm_cfg, h["rate"])


def _encode_header(header: dict) -> bytes:
    lines = [f"{k}: {json.dumps(header[k])}" for k in sorted(header)]
    return ("\n".join(lines) + "\n\n").encode("ascii")


def _decode_header(raw: bytes) -> dict:
    header = {}
    for line in raw.decode("ascii").strip("\n").split("\n"):
        key, sep, value = line.partition(": ")
        if not sep:
            raise ArtifactError(f"malformed header line {line!r}")
        header[key] = json.loads(value)
    return header


def save_model(model: AutoencoderModel, path,
               training: dict | None = None,
               qformat: QFormat | None = None) -> ModelArtifact:
    """Serialize a model; returns the artifact that was written."""
    artifact = ModelArtifact.from_model(model, training, qformat)
    payload_bytes = artifact.payload.astype("<f8").tobytes()
    artifact.header["payload_sha256"] = hashlib.sha256(
        payload_bytes).hexdigest()
    body = MAGIC + _encode_header(artifact.header) + payload_bytes
    Path(path).write_bytes(body + hashlib.sha256(body).digest())
    return artifact


def load_artifact(path) -> ModelArtifact:
    """Read and fully validate an artifact file."""
    blob = Path(path).read_bytes()
    if not blob.startswith(MAGIC):
        raise ArtifactError("bad magic; not a model artifact")
    if len(blob) < len(MAGIC) + _HASH_LEN:
        raise ArtifactError("truncated artifact")
    body, file_hash = blob[:-_HASH_LEN], blob[-_HASH_LEN:]
    if hashlib.sha256(body).digest() != file_hash:
        raise ChecksumMismatch("whole-file hash mismatch")
    sep = body.find(b"\n\n", len(MAGIC))
    if sep < 0:
        raise ArtifactError("missing header terminator")
    header = _decode_header(body[len(MAGIC):sep + 1])
    if header.get("version") != VERSION:
        raise UnsupportedVersion(
            f"artifact version {header.get('version')!r}; supported: "
            f"{VERSION}")
    payload_bytes = body[sep + 2:]
    if header.get("payload_sha256") != hashlib.sha256(
            payload_bytes).hexdigest():
        raise ChecksumMismatch("payload hash mismatch")
    payload = np.frombuffer(payload_bytes, dtype="<f8").astype(np.float64)
    artifact = ModelArtifact(header, payload)
    if payload.size != artifact.expected_payload_len():
        raise ArtifactError(
            f"payload holds {payload.size} values, header dims require "
            f"{artifact.expected_payload_len()}")
    return artifact


def load_model(path) -> AutoencoderModel:
    return load_artifact(path).to_model()


@dataclass
class QuantizedModel:
    """Encoder/decoder with every parameter on the Q-format grid."""

    encoder: QuantizedNet
    decoder: QuantizedNet
    fmt: QFormat
    ofdm: OfdmConfig
    rate: float

    @property
    def saturated_params(self) -> int:
        return self.encoder.saturated_params + self.decoder.saturated_params


def quantize_model(model: AutoencoderModel, q: QFormat) -> QuantizedModel:
    """Snap all weights/biases onto q's grid; saturation is counted, not fatal."""
    return QuantizedModel(quantize_net(model.encoder, q),
                          quantize_net(model.decoder, q),
                          q, model.ofdm, model.rate)


def grid_violations(model: AutoencoderModel, q: QFormat) -> int:
    """Count parameters that do not lie exactly on q's grid."""
    bad = 0
    for net in (model.encoder, model.decoder):
        for layer in net.layers:
            for arr in (layer.w, layer.b):
                qt = quantize(arr, q)
                bad += int(np.sum(qt.values != arr))
    return bad


@dataclass
class VerifyReport:
    dims_ok: bool
    checksum_ok: bool
    grid_ok: bool | None     # None when the artifact declares no Q-format
    problems: list[str]

    @property
    def all_ok(self) -> bool:
        return self.dims_ok and self.checksum_ok and self.grid_ok is not False


def verify(artifact: ModelArtifact) -> VerifyReport:
    """Integrity report: dimension chain, payload hash, grid membership."""
    problems = []
    dims_ok = True
    h = artifact.header
    if artifact.payload.size != artifact.expected_payload_len():
        dims_ok = False
        problems.append(
            f"payload holds {artifact.payload.size} values, dims require "
            f"{artifact.expected_payload_len()}")
    if h["encoder_dims"][-1] != h["decoder_dims"][0]:
        dims_ok = False
        problems.append("encoder output dim != decoder input dim")

    payload_bytes = artifact.payload.astype("<f8").tobytes()
    checksum_ok = h.get("payload_sha256") == hashlib.sha256(
        payload_bytes).hexdigest()
    if not checksum_ok:
        problems.append("payload hash mismatch")

    grid_ok = None
    q = artifact.qformat
    if q is not None and dims_ok:
        raw = np.rint(artifact.payload * q.scale)
        on_grid = (raw * q.step == artifact.payload) \
            & (raw >= q.raw_min) & (raw <= q.raw_max)
        grid_ok = bool(np.all(on_grid))
        if not grid_ok:
            problems.append(
                f"{int(np.sum(~on_grid))} parameters off the {q} grid")
    return VerifyReport(dims_ok, checksum_ok, grid_ok, problems)
