"""Measurements on the trained link: implementation error, BER, latency.

Implementation error is reported as relative RMS in percent (error RMS
normalized by reference-signal RMS), tracked per network layer so the
accumulation through the stack is visible.  BER curves come from early-
stopping Monte-Carlo over the end-to-end chain.  The latency model is a
time-multiplexed MAC array per layer: ceil(in*out/P) + D cycles, checked
against one OFDM symbol duration.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import autoencoder as ae
from . import neuralnet as nn
from . import ofdmlink as ofdm
from .autoencoder import AutoencoderModel
from .fixedpoint import QFormat, make_qformat
from .neuralnet import TrainConfig
from .ofdmlink import OfdmConfig
from .paramdelivery import QuantizedModel, quantize_model

CSV_SCHEMAS = {
    "layer_error.csv": ["model_id", "bit_width", "layer_idx", "rel_rms_pct",
                        "n_samples"],
    "ber.csv": ["model_id", "engine", "channel", "snr_db", "ber", "bits",
                "errors"],
    "sweep.csv": ["axis", "value", "seed", "final_rms_pct", "ber_ref"],
    "latency.csv": ["layer_idx", "macs", "cycles", "time_us", "budget_us",
                    "pass"],
}


def relative_rms(ref: np.ndarray, test: np.ndarray) -> float:
    """100 * rms(test - ref) / rms(ref); scale-invariant error measure."""
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape or ref.size == 0:
        raise ValueError(f"shape mismatch {ref.shape} vs {test.shape}")
    ref_rms = np.sqrt(np.mean(ref ** 2))
    if ref_rms == 0.0:
        raise ValueError("reference signal is identically zero")
    return 100.0 * float(np.sqrt(np.mean((test - ref) ** 2)) / ref_rms)


def evm(ref_symbols: np.ndarray, test_symbols: np.ndarray) -> float:
    """Error vector magnitude in percent over complex symbols."""
    ref = np.asarray(ref_symbols)
    test = np.asarray(test_symbols)
    if ref.shape != test.shape or ref.size == 0:
        raise ValueError(f"shape mismatch {ref.shape} vs {test.shape}")
    p_ref = np.mean(np.abs(ref) ** 2)
    if p_ref == 0.0:
        raise ValueError("reference signal is identically zero")
    return 100.0 * float(np.sqrt(np.mean(np.abs(test - ref) ** 2) / p_ref))


# ---------------------------------------------------------------------------
# Per-layer implementation error
# ---------------------------------------------------------------------------

@dataclass
class LayerErrorReport:
    rel_rms_pct: list[float]      # encoder layers then decoder layers
    bit_width: int
    int_bits: int
    model_id: str
    n_samples: int

    @property
    def first_layer(self) -> float:
        return self.rel_rms_pct[0]

    @property
    def final_layer(self) -> float:
        return self.rel_rms_pct[-1]


def model_id(model: AutoencoderModel) -> str:
    dims = model.encoder.dims + model.decoder.dims[1:]
    return "fc" + "-".join(str(d) for d in dims) + f"_r{model.rate:g}"


def layer_error_report(model: AutoencoderModel, q: QFormat, n_samples: int,
                       rng: np.random.Generator,
                       qmodel: QuantizedModel | None = None
                       ) -> LayerErrorReport:
    """Float vs fixed per-layer relative RMS on shared random blocks.

    The same modulated blocks run through the float codec and the fixed
    one back to back (noiseless link, so the decoder sees the normalized
    encoder output in both cases); each layer tap is compared.
    """
    if qmodel is None:
        qmodel = quantize_model(model, q)
    block = ae.random_block(n_samples, model.ofdm, rng)
    x0 = block.reals

    f_out, f_enc = nn.forward_float(model.encoder, x0)
    f_norm, _ = ae.normalize_power(f_out)
    _, f_dec = nn.forward_float(model.decoder, f_norm)

    q_out, q_enc = nn.forward_fixed(qmodel.encoder, x0)
    q_norm, _ = ae.normalize_power(q_out)
    _, q_dec = nn.forward_fixed(qmodel.decoder, q_norm)

    errors = [relative_rms(f, qt.values)
              for f, qt in zip(f_enc + f_dec, q_enc + q_dec)]
    return LayerErrorReport(errors, q.total_bits, q.int_bits,
                            model_id(model), n_samples)


# ---------------------------------------------------------------------------
# BER Monte-Carlo
# ---------------------------------------------------------------------------

@dataclass
class BerPoint:
    snr_db: float
    ber: float
    bits: int
    errors: int


@dataclass
class BerCurve:
    points: list[BerPoint]
    channel: str
    engine: str
    model_id: str

    def ber_at(self, snr_db: float) -> float:
        for p in self.points:
            if p.snr_db == snr_db:
                return p.ber
        raise KeyError(f"no point at {snr_db} dB")


_MC_CHUNK_BLOCKS = 512
_MC_TARGET_ERRORS = 100


def ber_sweep(model, engine: str, channel: str, snr_list,
              min_bits: int = 100_000, max_bits: int = 2_000_000,
              rng: np.random.Generator | None = None, seed: int = 0,
              equalize: bool = True) -> BerCurve:
    """Monte-Carlo BER over the end-to-end chain.

    Each SNR point accumulates blocks until at least 100 bit errors have
    been seen and min_bits simulated, or max_bits is reached.  model=None
    runs the uncoded reference chain (no networks, direct demodulation).
    """
    if min_bits < 10_000:
        raise ValueError("min_bits must be at least 10,000 per point")
    if rng is None:
        rng = np.random.default_rng(seed)
    uncoded = model is None
    if uncoded:
        cfg = OfdmConfig()
        mid = "uncoded"
        n_tx = cfg.n_subcarriers
    else:
        cfg = model.ofdm
        mid = model_id(model) if isinstance(model, AutoencoderModel) else \
            model_id_quantized(model)
        n_tx = model.encoder.dims[-1] // 2
    points = []
    for snr_db in snr_list:
        bits_done = 0
        errors = 0
        while bits_done < max_bits and (errors < _MC_TARGET_ERRORS
                                        or bits_done < min_bits):
            n_blocks = min(_MC_CHUNK_BLOCKS,
                           (max_bits - bits_done) // cfg.bits_per_block)
            n_blocks = max(n_blocks, 1)
            chan = ofdm.draw_channel(channel, (n_blocks, n_tx), snr_db, rng)
            tx_bits = rng.integers(0, 2, size=(n_blocks, cfg.bits_per_block))
            if uncoded:
                rx_bits = _uncoded_chain(tx_bits, cfg, chan, rng)
            else:
                rx_bits, _ = ae.end_to_end(model, tx_bits, chan, rng,
                                           engine=engine, equalize=equalize)
            errors += int(np.sum(rx_bits != tx_bits))
            bits_done += tx_bits.size
        points.append(BerPoint(float(snr_db), errors / bits_done, bits_done,
                               errors))
    return BerCurve(points, channel, engine, mid)


def model_id_quantized(qmodel) -> str:
    dims = qmodel.encoder.dims + qmodel.decoder.dims[1:]
    return ("fc" + "-".join(str(d) for d in dims)
            + f"_r{qmodel.rate:g}_{qmodel.fmt}")


def _uncoded_chain(tx_bits, cfg: OfdmConfig, chan, rng):
    """Plain 4-QAM OFDM without the neural codec, ZF at the receiver."""
    tx = ofdm.qam4_modulate(tx_bits)
    tx_time = ofdm.add_cp(ofdm.ifft(tx), cfg.cp_len)
    rx_freq = ofdm.fft(ofdm.remove_cp(tx_time, cfg.cp_len))
    rx_freq = ofdm.apply_channel(rx_freq, chan, rng)
    eq, _ = ofdm.equalize_zf(rx_freq, chan.h)
    return ofdm.qam4_demodulate(eq)


def qpsk_awgn_ber_theory(ebn0_db: float) -> float:
    """Closed-form uncoded QPSK bit error rate, Q(sqrt(2*snr)).

    The argument is per-bit SNR (Eb/N0); 4-QAM carries 2 bits per unit-
    power symbol, so symbol SNR is 3.01 dB above this value.
    """
    ebn0 = 10.0 ** (ebn0_db / 10.0)
    return 0.5 * math.erfc(math.sqrt(2.0 * ebn0) / math.sqrt(2.0))


def ebn0_to_symbol_snr_db(ebn0_db: float, bits_per_symbol: int = 2) -> float:
    return ebn0_db + 10.0 * math.log10(bits_per_symbol)


# ---------------------------------------------------------------------------
# Latency budget
# ---------------------------------------------------------------------------

@dataclass
class LayerLatency:
    layer_idx: int
    in_dim: int
    out_dim: int
    macs: int
    cycles: int
    time_us: float
    budget_us: float
    ok: bool


@dataclass
class LatencyEstimate:
    layers: list[LayerLatency]
    parallel_macs: int
    pipeline_depth: int
    f_clk: float
    symbol_duration_us: float

    @property
    def all_pass(self) -> bool:
        return all(l.ok for l in self.layers)


def estimate_latency(dims, parallel_macs: int, pipeline_depth: int,
                     f_clk: float, ofdm_cfg: OfdmConfig) -> LatencyEstimate:
    """Cycle-exact latency of each dense layer on a MAC array.

    cycles = ceil(in*out / P) + D; a layer passes when its time at f_clk
    is under one OFDM symbol duration (N + CP samples).  The pass check
    cross-multiplies integers so no floating-point rounding is involved.
    """
    if parallel_macs < 1 or pipeline_depth < 0 or f_clk <= 0:
        raise ValueError("need parallel_macs >= 1, pipeline_depth >= 0, "
                         "f_clk > 0")
    if len(dims) < 2:
        raise ValueError("dims needs at least one layer")
    n_samples = ofdm_cfg.n_subcarriers + ofdm_cfg.cp_len
    layers = []
    for i, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
        macs = din * dout
        cycles = -(-macs // parallel_macs) + pipeline_depth
        time_us = cycles / f_clk * 1e6
        budget_us = n_samples / ofdm_cfg.sample_rate * 1e6
        ok = cycles * ofdm_cfg.sample_rate < n_samples * f_clk
        layers.append(LayerLatency(i, din, dout, macs, cycles, time_us,
                                   budget_us, ok))
    return LatencyEstimate(layers, parallel_macs, pipeline_depth, f_clk,
                           n_samples / ofdm_cfg.sample_rate * 1e6)


def stack_dims(model: AutoencoderModel) -> list[int]:
    """Dimension chain of the full encoder+decoder pipeline."""
    return model.encoder.dims + model.decoder.dims[1:]


# ---------------------------------------------------------------------------
# Structure sweeps
# ---------------------------------------------------------------------------

SWEEP_AXES = ("bit_width", "hidden_nodes", "n_layers")


@dataclass
class SweepSpec:
    axis: str
    values: list
    seeds: list[int]
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    hidden_nodes: int = 128
    n_layers: int = 5
    rate: float = 1.0
    train: TrainConfig = field(default_factory=TrainConfig)
    channel: str = "rayleigh"
    equalize: bool = True
    qformat: QFormat = field(default_factory=lambda: make_qformat(16, 3))
    ref_snr_db: float = 30.0
    rms_samples: int = 2000
    ber_min_bits: int = 100_000
    ber_max_bits: int = 1_000_000
    out_path: str | None = None

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"axis must be one of {SWEEP_AXES}")
        if not self.values:
            raise ValueError("values must be non-empty")
        if not self.seeds:
            raise ValueError("need at least one seed")


@dataclass
class SweepRow:
    axis: str
    value: object
    seed: int
    per_layer_rms_pct: list[float]
    final_rms_pct: float
    ber_ref: float


def _train_for_sweep(spec: SweepSpec, hidden: int, layers: int, seed: int,
                     cache: dict) -> AutoencoderModel:
    key = (hidden, layers, seed)
    if key not in cache:
        model = ae.build_model(spec.ofdm, hidden, layers, spec.rate,
                               seed=seed)
        cfg = TrainConfig(**{**spec.train.__dict__, "seed": seed})
        cache[key] = ae.train(model, cfg, spec.channel,
                              spec.equalize).model
    return cache[key]


def run_sweep(spec: SweepSpec, rng: np.random.Generator | None = None,
              model_cache: dict | None = None) -> list[SweepRow]:
    """One row per (axis value, seed): per-layer RMS + BER at the
    reference SNR.

    bit_width sweeps reuse a single trained model per seed and vary the
    Q-format (fixed-engine BER); hidden_nodes and n_layers train one model
    per value and report float-engine BER.  Rows are flushed to
    spec.out_path as they finish.
    """
    if rng is None:
        rng = np.random.default_rng(12345)
    cache = model_cache if model_cache is not None else {}
    rows = []
    writer = None
    fh = None
    if spec.out_path:
        fh = open(spec.out_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(CSV_SCHEMAS["sweep.csv"])
    try:
        for value in spec.values:
            for seed in spec.seeds:
                hidden = spec.hidden_nodes
                layers = spec.n_layers
                q = spec.qformat
                if spec.axis == "hidden_nodes":
                    hidden = int(value)
                elif spec.axis == "n_layers":
                    layers = int(value)
                else:
                    q = make_qformat(int(value), spec.qformat.int_bits)
                model = _train_for_sweep(spec, hidden, layers, seed, cache)
                qmodel = quantize_model(model, q)
                report = layer_error_report(
                    model, q, spec.rms_samples,
                    np.random.default_rng(rng.integers(2 ** 63)), qmodel)
                if spec.axis == "bit_width":
                    ber_model, engine = qmodel, "fixed"
                else:
                    ber_model, engine = model, "float"
                curve = ber_sweep(
                    ber_model, engine, spec.channel, [spec.ref_snr_db],
                    spec.ber_min_bits, spec.ber_max_bits,
                    np.random.default_rng(rng.integers(2 ** 63)),
                    equalize=spec.equalize)
                row = SweepRow(spec.axis, value, seed, report.rel_rms_pct,
                               report.final_layer, curve.points[0].ber)
                rows.append(row)
                if writer:
                    writer.writerow([row.axis, row.value, row.seed,
                                     f"{row.final_rms_pct:.10g}",
                                     f"{row.ber_ref:.10g}"])
                    fh.flush()
    finally:
        if fh:
            fh.close()
    return rows


# ---------------------------------------------------------------------------
# CSV writers (stable column order per CSV_SCHEMAS)
# ---------------------------------------------------------------------------

def write_layer_error_csv(path, reports: list[LayerErrorReport]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_SCHEMAS["layer_error.csv"])
        for rep in reports:
            for idx, val in enumerate(rep.rel_rms_pct):
                w.writerow([rep.model_id, rep.bit_width, idx,
                            f"{val:.10g}", rep.n_samples])


def write_ber_csv(path, curves: list[BerCurve]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_SCHEMAS["ber.csv"])
        for c in curves:
            for p in c.points:
                w.writerow([c.model_id, c.engine, c.channel,
                            f"{p.snr_db:.10g}", f"{p.ber:.10g}", p.bits,
                            p.errors])


def write_latency_csv(path, est: LatencyEstimate):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_SCHEMAS["latency.csv"])
        for l in est.layers:
            w.writerow([l.layer_idx, l.macs, l.cycles, f"{l.time_us:.10g}",
                        f"{l.budget_us:.10g}", int(l.ok)])
