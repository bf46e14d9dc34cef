#!/usr/bin/env python3
"""Per-layer implementation error for different bus widths.

Runs the same random information blocks through the float codec and the
bit-exact fixed-point one, reporting the relative RMS gap layer by layer.
Two effects are visible: the error grows as the signal crosses layers
(front-layer errors accumulate), and each 8-bit width step moves the
whole curve by roughly 2^8.
"""

import numpy as np

import fxlink as fx
from fxlink import autoencoder as ae
from fxlink import metrics as mx

ofdm = fx.OfdmConfig()
print("training the measurement codec (5 layers, 64 nodes) ...")
model = ae.build_model(ofdm, hidden_nodes=64, total_layers=5, seed=2)
cfg = fx.TrainConfig(epochs=40, batches_per_epoch=100, seed=2,
                     snr_range_db=(5.0, 25.0))
model = ae.train(model, cfg, channel="rayleigh", equalize=True).model

n_samples = 3000
reports = {}
for bits in (8, 16, 24):
    q = fx.make_qformat(bits, 3)
    reports[bits] = mx.layer_error_report(model, q, n_samples,
                                          np.random.default_rng(7))

depth = len(reports[16].rel_rms_pct)
labels = [f"enc{i}" for i in range(model.encoder.depth)] + \
         [f"dec{i}" for i in range(model.decoder.depth)]

print(f"\nrelative RMS error per layer (%), {n_samples} blocks")
print(f"{'layer':>6} " + " ".join(f"{b:>12}b" for b in (8, 16, 24)))
for i in range(depth):
    row = " ".join(f"{reports[b].rel_rms_pct[i]:>13.5f}" for b in (8, 16, 24))
    print(f"{labels[i]:>6} {row}")

r8, r16 = reports[8], reports[16]
print(f"\nfirst-layer ratio 8b/16b: {r8.first_layer / r16.first_layer:.0f} "
      "(step-size analysis predicts ~256)")
print(f"error accumulates: 16b final {r16.final_layer:.4f}% vs first "
      f"{r16.first_layer:.4f}%")
print("24b improves on 16b by ~256x again, at much higher hardware cost.")
