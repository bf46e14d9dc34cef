"""Command-line workflows: train, quantize, simulate, sweep, latency, report.

Exit codes: 0 success, 1 usage/config error, 2 runtime failure.  All
randomness derives from one --seed (or the config seed) split into
per-component streams with numpy SeedSequence spawn keys, so runs are
reproducible and CSV outputs byte-stable.  FXLINK_OUT overrides the
output directory for every command.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from . import metrics as mx
from .fixedpoint import BitAllocationError, make_qformat
from .neuralnet import TrainConfig
from .ofdmlink import CHANNEL_KINDS, OfdmConfig
from .paramdelivery import (ArtifactError, grid_violations, load_artifact,
                            quantize_model, save_model)


class ConfigError(ValueError):
    pass


# seed-splitting rule: component k of root seed s uses
# default_rng(SeedSequence(s, spawn_key=(k,))); documented in README
_STREAM_TRAIN = 0
_STREAM_SIMULATE = 1
_STREAM_SWEEP = 2
_STREAM_EVM = 3


def split_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed,
                                                        spawn_key=(stream,)))


_CONFIG_SCHEMA = {
    "ofdm": {"n_subcarriers": int, "cp_len": int, "modulation": str,
             "sample_rate": float},
    "model": {"hidden_nodes": int, "layers": int, "rate": float},
    "train": {"learning_rate": float, "batch_size": int, "epochs": int,
              "batches_per_epoch": int, "optimizer": str,
              "snr_min_db": float, "snr_max_db": float, "seed": int},
    "channel": {"kind": str, "equalize": bool},
    "quantize": {"bits": int, "int_bits": int},
    "sweep": {"axis": str, "values": str, "seeds": str, "ref_snr_db": float,
              "rms_samples": int, "ber_min_bits": int, "ber_max_bits": int},
    "output": {"dir": str},
}

_DEFAULTS = {
    "ofdm": {"n_subcarriers": 16, "cp_len": 4, "modulation": "qam4",
             "sample_rate": 1e6},
    "model": {"hidden_nodes": 128, "layers": 5, "rate": 1.0},
    "train": {"learning_rate": 1e-3, "batch_size": 64, "epochs": 100,
              "batches_per_epoch": 200, "optimizer": "adam",
              "snr_min_db": 5.0, "snr_max_db": 25.0, "seed": 0},
    "channel": {"kind": "rayleigh", "equalize": None},
    "quantize": {"bits": 16, "int_bits": 3},
    "sweep": {"axis": "bit_width", "values": "8,16,24", "seeds": "0",
              "ref_snr_db": 30.0, "rms_samples": 2000,
              "ber_min_bits": 100_000, "ber_max_bits": 1_000_000},
    "output": {"dir": "."},
}


def read_config(path) -> dict:
    """Parse the INI run config, rejecting unknown sections and keys."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    cfg = {sec: dict(vals) for sec, vals in _DEFAULTS.items()}
    for section in parser.sections():
        if section not in _CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser[section].items():
            if key not in _CONFIG_SCHEMA[section]:
                raise ConfigError(
                    f"unknown config key '{key}' in section [{section}]")
            kind = _CONFIG_SCHEMA[section][key]
            try:
                if kind is bool:
                    cfg[section][key] = parser[section].getboolean(key)
                else:
                    cfg[section][key] = kind(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for '{key}' in [{section}]: {exc}") from exc
    return cfg


def _outdir(args, cfg=None) -> Path:
    env = os.environ.get("FXLINK_OUT")
    if env:
        path = Path(env)
    elif getattr(args, "out", None):
        path = Path(args.out)
    elif cfg is not None:
        path = Path(cfg["output"]["dir"])
    else:
        path = Path(".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _train_config(cfg: dict, seed_override=None) -> TrainConfig:
    t = cfg["train"]
    seed = t["seed"] if seed_override is None else seed_override
    return TrainConfig(
        learning_rate=t["learning_rate"], batch_size=t["batch_size"],
        epochs=t["epochs"], batches_per_epoch=t["batches_per_epoch"],
        optimizer=t["optimizer"], seed=seed,
        snr_range_db=(t["snr_min_db"], t["snr_max_db"]))


def _ofdm_config(cfg: dict) -> OfdmConfig:
    o = cfg["ofdm"]
    return OfdmConfig(o["n_subcarriers"], o["cp_len"], o["modulation"],
                      o["sample_rate"])


def _equalize(cfg: dict) -> bool:
    eq = cfg["channel"]["equalize"]
    if eq is None:
        eq = cfg["channel"]["kind"] == "rayleigh"
    return eq


def cmd_train(args) -> int:
    cfg = read_config(args.config)
    out = _outdir(args, cfg)
    tc = _train_config(cfg, args.seed)
    ofdm_cfg = _ofdm_config(cfg)
    kind = cfg["channel"]["kind"]
    if kind not in CHANNEL_KINDS:
        raise ConfigError(f"unknown channel kind {kind!r}")
    model = ae.build_model(ofdm_cfg, cfg["model"]["hidden_nodes"],
                           cfg["model"]["layers"], cfg["model"]["rate"],
                           seed=tc.seed)
    result = ae.train(model, tc, kind, _equalize(cfg),
                      rng=split_rng(tc.seed, _STREAM_TRAIN))
    meta = {"channel": kind, "equalize": _equalize(cfg),
            "seed": tc.seed, "epochs": tc.epochs,
            "learning_rate": tc.learning_rate,
            "batch_size": tc.batch_size,
            "batches_per_epoch": tc.batches_per_epoch,
            "snr_range_db": list(tc.snr_range_db),
            "optimizer": tc.optimizer,
            "final_loss": result.loss_history[-1]}
    artifact_path = out / "model.fxl"
    save_model(result.model, artifact_path, training=meta)
    with open(out / "loss.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss"])
        for i, val in enumerate(result.loss_history, 1):
            w.writerow([i, f"{val:.10g}"])
    print(f"wrote {artifact_path} (final epoch loss "
          f"{result.loss_history[-1]:.6g}) and {out / 'loss.csv'}")
    return 0


def cmd_quantize(args) -> int:
    q = make_qformat(args.bits, args.int_bits)
    artifact = load_artifact(args.artifact)
    model = artifact.to_model()
    qm = quantize_model(model, q)
    # grid check applies to the quantized parameters
    qfloat = ae.AutoencoderModel(qm.encoder.to_float(), qm.decoder.to_float(),
                                 model.ofdm, model.rate)
    violations = grid_violations(qfloat, q)
    payload_hash = hashlib.sha256(
        artifact.payload.astype("<f8").tobytes()).hexdigest()
    descriptor = {
        "artifact": str(args.artifact),
        "payload_sha256": payload_hash,
        "qformat": {"total_bits": q.total_bits, "int_bits": q.int_bits,
                    "frac_bits": q.frac_bits},
        "saturated_params": qm.saturated_params,
        "grid_ok": violations == 0,
    }
    out_path = Path(args.out) if args.out else Path(
        str(args.artifact) + f".q{q.total_bits}i{q.int_bits}.json")
    out_path.write_text(json.dumps(descriptor, indent=2, sort_keys=True)
                        + "\n")
    print(f"{q}: saturated_params={qm.saturated_params} "
          f"grid_ok={violations == 0}")
    print(f"wrote {out_path}")
    return 0


def cmd_simulate(args) -> int:
    snr_list = _parse_floats(args.snr)
    if not snr_list:
        raise ConfigError("--snr needs at least one value")
    if args.channel not in CHANNEL_KINDS:
        raise ConfigError(f"unknown channel kind {args.channel!r}")
    out = _outdir(args)
    q = make_qformat(args.bits, args.int_bits)
    model = load_artifact(args.artifact).to_model()
    qm = quantize_model(model, q)
    equalize = not args.no_equalize
    ber_model = qm if args.engine == "fixed" else model
    curve = mx.ber_sweep(ber_model, args.engine, args.channel, snr_list,
                         args.bits_min, args.bits_max,
                         split_rng(args.seed, _STREAM_SIMULATE),
                         equalize=equalize)
    mx.write_ber_csv(out / "ber.csv", [curve])
    report = mx.layer_error_report(
        model, q, args.rms_samples, split_rng(args.seed, _STREAM_SWEEP), qm)
    mx.write_layer_error_csv(out / "layer_error.csv", [report])

    rng = split_rng(args.seed, _STREAM_EVM)
    bits = rng.integers(0, 2, size=(2000, model.ofdm.bits_per_block))
    chan = _draw_eval_channel(args.channel, bits.shape[0], model, snr_list[-1],
                              rng)
    _, taps_f = ae.end_to_end(model, bits, chan,
                              np.random.default_rng(args.seed),
                              engine="float", equalize=equalize)
    evm_tx = mx.evm(taps_f["tx_symbols"], taps_f["rx_symbols"])
    print(f"evm_vs_tx_pct(float @ {snr_list[-1]:g} dB): {evm_tx:.4f}")
    if args.engine == "fixed":
        _, taps_q = ae.end_to_end(qm, bits, chan,
                                  np.random.default_rng(args.seed),
                                  engine="fixed", equalize=equalize)
        evm_impl = mx.evm(taps_f["rx_symbols"], taps_q["rx_symbols"])
        print(f"evm_vs_float_pct({q}): {evm_impl:.4f}")
    for p in curve.points:
        print(f"ber snr={p.snr_db:g} dB: {p.ber:.6g} "
              f"({p.errors} errors / {p.bits} bits)")
    print(f"wrote {out / 'ber.csv'} and {out / 'layer_error.csv'}")
    return 0


def _draw_eval_channel(kind, n_blocks, model, snr_db, rng):
    from .ofdmlink import draw_channel
    return draw_channel(kind, (n_blocks, model.n_tx_subcarriers), snr_db,
                        rng)


def cmd_sweep(args) -> int:
    cfg = read_config(args.config)
    out = _outdir(args, cfg)
    s = cfg["sweep"]
    seed = cfg["train"]["seed"] if args.seed is None else args.seed
    values = [int(v) for v in _parse_floats(s["values"])]
    seeds = [int(v) for v in _parse_floats(s["seeds"])]
    if args.seed is not None:
        seeds = [seed + i for i in range(len(seeds))]
    spec = mx.SweepSpec(
        axis=s["axis"], values=values, seeds=seeds,
        ofdm=_ofdm_config(cfg),
        hidden_nodes=cfg["model"]["hidden_nodes"],
        n_layers=cfg["model"]["layers"], rate=cfg["model"]["rate"],
        train=_train_config(cfg), channel=cfg["channel"]["kind"],
        equalize=_equalize(cfg),
        qformat=make_qformat(cfg["quantize"]["bits"],
                             cfg["quantize"]["int_bits"]),
        ref_snr_db=s["ref_snr_db"], rms_samples=s["rms_samples"],
        ber_min_bits=s["ber_min_bits"], ber_max_bits=s["ber_max_bits"],
        out_path=str(out / "sweep.csv"))
    rows = mx.run_sweep(spec, split_rng(seed, _STREAM_SWEEP))
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows)")
    return 0


def cmd_latency(args) -> int:
    dims = [int(v) for v in _parse_floats(args.dims)]
    ofdm_cfg = OfdmConfig(args.n_subcarriers, args.cp_len,
                          sample_rate=args.sample_rate_mhz * 1e6)
    est = mx.estimate_latency(dims, args.parallel_macs, args.pipeline_depth,
                              args.clk_mhz * 1e6, ofdm_cfg)
    out = _outdir(args)
    mx.write_latency_csv(out / "latency.csv", est)
    print(f"symbol duration: {est.symbol_duration_us:g} us")
    for l in est.layers:
        print(f"layer {l.layer_idx} ({l.in_dim}x{l.out_dim}): {l.macs} MACs, "
              f"{l.cycles} cycles, {l.time_us:g} us -> "
              f"{'PASS' if l.ok else 'FAIL'}")
    print(f"wrote {out / 'latency.csv'}")
    return 0


_REPORT_TABLES = {"bit_width": "fig5.csv", "hidden_nodes": "fig6a.csv",
                  "n_layers": "fig6b.csv"}


def cmd_report(args) -> int:
    src = Path(args.csv_dir)
    files = sorted(src.glob("sweep*.csv"))
    rows = []
    for path in files:
        with open(path, newline="") as fh:
            rows.extend(list(csv.DictReader(fh)))
    if not rows:
        raise RuntimeError(f"no sweep rows found under {src}")
    out = _outdir(args)
    written = []
    for axis, name in _REPORT_TABLES.items():
        axis_rows = [r for r in rows if r["axis"] == axis]
        if not axis_rows:
            continue
        by_value: dict = {}
        for r in axis_rows:
            by_value.setdefault(float(r["value"]), []).append(r)
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["value", "mean_final_rms_pct", "mean_ber_ref",
                        "n_seeds"])
            for value in sorted(by_value):
                grp = by_value[value]
                rms = np.mean([float(r["final_rms_pct"]) for r in grp])
                ber = np.mean([float(r["ber_ref"]) for r in grp])
                w.writerow([f"{value:g}", f"{rms:.10g}", f"{ber:.10g}",
                            len(grp)])
        written.append(name)
    print(f"wrote {', '.join(written)} under {out}")
    return 0


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in str(text).replace(";", ",").split(",")
            if tok.strip()]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fxlink", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model per the config file")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out", default=None)
    t.set_defaults(func=cmd_train)

    q = sub.add_parser("quantize", help="quantize an artifact's parameters")
    q.add_argument("artifact")
    q.add_argument("--bits", type=int, default=16)
    q.add_argument("--int-bits", type=int, default=3, dest="int_bits")
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_quantize)

    s = sub.add_parser("simulate", help="BER + layer-error measurement")
    s.add_argument("artifact")
    s.add_argument("--engine", choices=["float", "fixed"], default="float")
    s.add_argument("--channel", default="rayleigh")
    s.add_argument("--snr", required=True,
                   help="comma-separated SNR points in dB")
    s.add_argument("--bits-min", type=int, default=100_000, dest="bits_min")
    s.add_argument("--bits-max", type=int, default=2_000_000, dest="bits_max")
    s.add_argument("--bits", type=int, default=16)
    s.add_argument("--int-bits", type=int, default=3, dest="int_bits")
    s.add_argument("--rms-samples", type=int, default=2000,
                   dest="rms_samples")
    s.add_argument("--no-equalize", action="store_true", dest="no_equalize")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="structure sweep per the config file")
    w.add_argument("--config", required=True)
    w.add_argument("--seed", type=int, default=None)
    w.add_argument("--out", default=None)
    w.set_defaults(func=cmd_sweep)

    l = sub.add_parser("latency", help="MAC-array latency budget check")
    l.add_argument("--dims", default="32,512,512,32,512,32")
    l.add_argument("--parallel-macs", type=int, default=512,
                   dest="parallel_macs")
    l.add_argument("--pipeline-depth", type=int, default=4,
                   dest="pipeline_depth")
    l.add_argument("--clk-mhz", type=float, default=100.0, dest="clk_mhz")
    l.add_argument("--n-subcarriers", type=int, default=16,
                   dest="n_subcarriers")
    l.add_argument("--cp-len", type=int, default=4, dest="cp_len")
    l.add_argument("--sample-rate-mhz", type=float, default=1.0,
                   dest="sample_rate_mhz")
    l.add_argument("--out", default=None)
    l.set_defaults(func=cmd_latency)

    r = sub.add_parser("report", help="aggregate sweep CSVs into tables")
    r.add_argument("csv_dir")
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BitAllocationError) as exc:
        print(f"fxlink: config error: {exc}", file=sys.stderr)
        return 1
    except (ArtifactError, OSError, RuntimeError, ValueError) as exc:
        print(f"fxlink: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
