"""Artifact file format: round trips, corruption detection, quantization."""

import numpy as np
import pytest

import fxlink as fx
from fxlink import autoencoder as ae
from fxlink.paramdelivery import (ArtifactError, ChecksumMismatch,
                                  ModelArtifact, UnsupportedVersion,
                                  grid_violations, load_artifact, load_model,
                                  quantize_model, save_model, verify)

Q16 = fx.make_qformat(16, 3)


def fresh_model(seed=0, hidden=24, layers=5):
    return ae.build_model(fx.OfdmConfig(), hidden, layers, seed=seed)


def test_save_load_roundtrip_bit_exact(tmp_path):
    model = fresh_model(3)
    path = tmp_path / "m.fxl"
    save_model(model, path, training={"note": "unit"})
    loaded = load_model(path)
    for la, lb in zip(model.encoder.layers + model.decoder.layers,
                      loaded.encoder.layers + loaded.decoder.layers):
        assert np.array_equal(la.w, lb.w)
        assert np.array_equal(la.b, lb.b)
        assert la.activation == lb.activation
    assert loaded.ofdm == model.ofdm
    assert loaded.rate == model.rate


def test_save_is_byte_deterministic(tmp_path):
    model = fresh_model(4)
    a, b = tmp_path / "a.fxl", tmp_path / "b.fxl"
    save_model(model, a)
    save_model(model, b)
    assert a.read_bytes() == b.read_bytes()


def test_corrupted_payload_byte_detected(tmp_path):
    model = fresh_model(5)
    path = tmp_path / "m.fxl"
    save_model(model, path)
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0xFF    # flip a payload byte
    path.write_bytes(bytes(blob))
    with pytest.raises(ChecksumMismatch):
        load_artifact(path)


def test_header_dim_mismatch_detected(tmp_path):
    model = fresh_model(6)
    path = tmp_path / "m.fxl"
    save_model(model, path)
    raw = path.read_bytes()
    # hand-edit a dimension, then re-seal both hashes so only the
    # dims/payload inconsistency remains
    import hashlib
    import json
    body = raw[:-32]
    sep = body.find(b"\n\n", 8)
    header_lines = body[8:sep].decode().split("\n")
    edited = []
    for line in header_lines:
        key, _, value = line.partition(": ")
        if key == "encoder_dims":
            dims = json.loads(value)
            dims[1] += 1
            value = json.dumps(dims)
        edited.append(f"{key}: {value}")
    new_body = b"FXLINK1\n" + ("\n".join(edited) + "\n\n").encode() \
        + body[sep + 2:]
    path.write_bytes(new_body + hashlib.sha256(new_body).digest())
    with pytest.raises(ArtifactError):
        load_artifact(path)


def test_bad_magic_and_version(tmp_path):
    import hashlib
    path = tmp_path / "m.fxl"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
    with pytest.raises(ArtifactError):
        load_artifact(path)
    model = fresh_model(7)
    save_model(model, path)
    body = path.read_bytes()[:-32].replace(b"version: 1", b"version: 99")
    path.write_bytes(body + hashlib.sha256(body).digest())
    with pytest.raises(UnsupportedVersion):
        load_artifact(path)


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_artifact(tmp_path / "nope.fxl")


# ---------------------------------------------------------------------------
# quantization
# ---------------------------------------------------------------------------

def test_quantize_on_grid_model_unchanged():
    model = fresh_model(8)
    for net in (model.encoder, model.decoder):
        for layer in net.layers:
            layer.w = fx.quantize(layer.w, Q16).values
            layer.b = fx.quantize(layer.b, Q16).values
    qm = quantize_model(model, Q16)
    assert qm.saturated_params == 0
    for ql, fl in zip(qm.encoder.layers, model.encoder.layers):
        assert np.array_equal(ql.w.values, fl.w)


def test_quantize_saturation_reported():
    model = fresh_model(9)
    model.encoder.layers[0].w[0, 0] = 9.3
    qm = quantize_model(model, Q16)
    assert qm.saturated_params >= 1
    assert qm.encoder.layers[0].w.values[0, 0] == 7.999755859375


def test_quantize_idempotent():
    model = fresh_model(10)
    qm = quantize_model(model, Q16)
    back = ae.AutoencoderModel(qm.encoder.to_float(), qm.decoder.to_float(),
                               model.ofdm, model.rate)
    qm2 = quantize_model(back, Q16)
    assert qm2.saturated_params == 0
    for a, b in zip(qm.encoder.layers, qm2.encoder.layers):
        assert np.array_equal(a.w.raw, b.w.raw)
        assert np.array_equal(a.b.raw, b.b.raw)
    assert grid_violations(back, Q16) == 0


def test_no_saturation_when_params_in_range():
    model = fresh_model(11)
    peak = max(float(np.abs(arr).max())
               for net in (model.encoder, model.decoder)
               for layer in net.layers for arr in (layer.w, layer.b))
    assert peak < Q16.max_value
    assert quantize_model(model, Q16).saturated_params == 0


def test_quantize_32bit_forward_close_to_float(awgn_model):
    q32 = fx.make_qformat(32, 3)
    qm = quantize_model(awgn_model, q32)
    rng = np.random.default_rng(20)
    x = ae.random_block(100, awgn_model.ofdm, rng).reals
    from fxlink.neuralnet import forward_fixed, forward_float
    yf, _ = forward_float(awgn_model.encoder, x)
    yq, _ = forward_fixed(qm.encoder, x)
    rel = np.sqrt(np.mean((yq - yf) ** 2) / np.mean(yf ** 2))
    assert rel <= 1e-5


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def test_verify_fresh_artifact_passes(tmp_path):
    model = fresh_model(12)
    path = tmp_path / "m.fxl"
    save_model(model, path, qformat=None)
    report = verify(load_artifact(path))
    assert report.all_ok
    assert report.grid_ok is None
    assert report.problems == []


def test_verify_grid_violation_reported(tmp_path):
    model = fresh_model(13)
    qm = quantize_model(model, Q16)
    snapped = ae.AutoencoderModel(qm.encoder.to_float(),
                                  qm.decoder.to_float(), model.ofdm,
                                  model.rate)
    path = tmp_path / "m.fxl"
    save_model(snapped, path, qformat=Q16)
    good = verify(load_artifact(path))
    assert good.all_ok and good.grid_ok is True

    art = load_artifact(path)
    art.payload[7] += Q16.step / 3  # push one weight off the grid
    bad = verify(art)
    assert bad.grid_ok is False
    assert any("grid" in p for p in bad.problems)


def test_verify_empty_payload_fails_dims():
    model = fresh_model(14)
    art = ModelArtifact.from_model(model)
    art.header["payload_sha256"] = "0" * 64
    art.payload = np.empty(0)
    report = verify(art)
    assert not report.dims_ok
    assert not report.all_ok
