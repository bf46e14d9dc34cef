"""Neural encoder/decoder wrapped around the OFDM chain.

The transmit side modulates bits to 4-QAM symbols, feeds their interleaved
real parts to the encoder network, normalizes the encoded block to unit
average power per complex sample, and sends it through IFFT -> CP ->
channel -> CP removal -> FFT.  The receive side optionally zero-forces the
known gains and runs the decoder network; decisions are per-axis signs.

Training runs this whole chain in float with fresh channel gains and noise
per sample; gradients treat the gains and the noise draw as constants and
propagate through the (linear) transforms via their adjoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neuralnet as nn
from . import ofdmlink as ofdm
from .neuralnet import FCNet, TrainConfig
from .ofdmlink import OfdmConfig


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


@dataclass
class SymbolBlock:
    """One information block: source bits and their modulated symbols."""

    bits: np.ndarray
    symbols: np.ndarray

    @property
    def reals(self) -> np.ndarray:
        return ofdm.to_reals(self.symbols)


@dataclass
class AutoencoderModel:
    encoder: FCNet
    decoder: FCNet
    ofdm: OfdmConfig
    rate: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise ValueError("rate must be in (0, 1]")
        d_in = 2 * self.ofdm.n_subcarriers
        d_enc = self.encoded_dim
        if self.encoder.dims[0] != d_in or self.encoder.dims[-1] != d_enc:
            raise ValueError(
                f"encoder must map {d_in} -> {d_enc}, got {self.encoder.dims}")
        if self.decoder.dims[0] != d_enc or self.decoder.dims[-1] != d_in:
            raise ValueError(
                f"decoder must map {d_enc} -> {d_in}, got {self.decoder.dims}")
        n_tx = d_enc // 2
        if n_tx & (n_tx - 1):
            raise ValueError(
                f"encoded block of {n_tx} complex samples is not a power of "
                "two; pick a rate that keeps the IFFT radix-2")

    @property
    def encoded_dim(self) -> int:
        """Real-valued encoder output width: 2*N/rate."""
        d = 2 * self.ofdm.n_subcarriers / self.rate
        if abs(d - round(d)) > 1e-9 or round(d) % 2:
            raise ValueError(f"rate {self.rate} does not yield a whole "
                             "number of complex samples")
        return int(round(d))

    @property
    def n_tx_subcarriers(self) -> int:
        """Subcarriers actually transmitted (= N/rate)."""
        return self.encoded_dim // 2


def build_model(ofdm_cfg: OfdmConfig, hidden_nodes: int = 128,
                total_layers: int = 5, rate: float = 1.0,
                seed: int = 0) -> AutoencoderModel:
    """Encoder+decoder pair totaling `total_layers` weight layers.

    Layers split as evenly as possible, encoder taking the extra one.
    A 1-weight-layer net is a plain affine map (no hidden nodes).
    """
    if total_layers < 2:
        raise ValueError("need at least one layer per side")
    n_enc = (total_layers + 1) // 2
    n_dec = total_layers - n_enc
    d_in = 2 * ofdm_cfg.n_subcarriers
    d_enc = int(round(d_in / rate))
    enc_dims = [d_in] + [hidden_nodes] * (n_enc - 1) + [d_enc]
    dec_dims = [d_enc] + [hidden_nodes] * (n_dec - 1) + [d_in]
    encoder = nn.init_he(enc_dims, seed=seed)
    decoder = nn.init_he(dec_dims, seed=seed + 1)
    return AutoencoderModel(encoder, decoder, ofdm_cfg, rate)


def random_block(n_blocks: int, ofdm_cfg: OfdmConfig,
                 rng: np.random.Generator) -> SymbolBlock:
    bits = rng.integers(0, 2, size=(n_blocks, ofdm_cfg.bits_per_block))
    return SymbolBlock(bits, ofdm.qam4_modulate(bits))


def _complex_power(x: np.ndarray) -> float:
    # interleaved reals: power per complex sample = 2 * mean(element^2)
    return 2.0 * float(np.mean(x ** 2))


def normalize_power(x: np.ndarray):
    """Scale a batch so its average power per complex sample is 1."""
    s = np.sqrt(_complex_power(x))
    if s == 0.0:
        raise ValueError("cannot normalize an all-zero batch")
    return x / s, s


def encode(model: AutoencoderModel, r: np.ndarray) -> np.ndarray:
    """Encoder forward + per-batch power normalization."""
    y, _ = nn.forward_float(model.encoder, r)
    out, _ = normalize_power(y)
    return out


def decode(model: AutoencoderModel, y: np.ndarray) -> np.ndarray:
    out, _ = nn.forward_float(model.decoder, y)
    return out


def loss(r: np.ndarray, r_hat: np.ndarray) -> float:
    r = np.asarray(r, dtype=np.float64)
    r_hat = np.asarray(r_hat, dtype=np.float64)
    if r.shape != r_hat.shape:
        raise ValueError(f"shape mismatch {r.shape} vs {r_hat.shape}")
    return float(np.mean((r_hat - r) ** 2))


# ---------------------------------------------------------------------------
# End-to-end chain (inference)
# ---------------------------------------------------------------------------

def end_to_end(model, bits: np.ndarray,
               realization: ofdm.ChannelRealization,
               rng: np.random.Generator, engine: str = "float",
               equalize: bool = True):
    """Run the full chain on a batch of bit blocks.

    model is an AutoencoderModel for engine='float', or a quantized model
    (paramdelivery.QuantizedModel) for engine='fixed'.  With the fixed
    engine both networks run on the integer datapath while the non-network
    blocks (normalization, FFTs, channel) stay float.

    Returns (decoded_bits, taps); taps captures every intermediate signal
    plus both networks' per-layer outputs.
    """
    if engine == "float":
        if not isinstance(model.encoder, FCNet):
            raise ValueError("float engine requires a float model")
        fwd = nn.forward_float
    elif engine == "fixed":
        if isinstance(model.encoder, FCNet):
            raise ValueError("fixed engine requires a quantized model")
        fwd = nn.forward_fixed
    else:
        raise ValueError(f"unknown engine {engine!r}")

    bits = np.asarray(bits)
    single = bits.ndim == 1
    if single:
        bits = bits[None, :]
    if bits.shape[-1] != model.ofdm.bits_per_block:
        raise ValueError(
            f"expected {model.ofdm.bits_per_block} bits per block")
    tx_symbols = ofdm.qam4_modulate(bits)
    x0 = ofdm.to_reals(tx_symbols)

    enc_out, enc_layers = fwd(model.encoder, x0)
    encoded, _ = normalize_power(enc_out)

    tx_freq = ofdm.to_complex(encoded)
    tx_time = ofdm.add_cp(ofdm.ifft(tx_freq), model.ofdm.cp_len)
    rx_freq = ofdm.fft(ofdm.remove_cp(tx_time, model.ofdm.cp_len))
    rx_freq = ofdm.apply_channel(rx_freq, realization, rng)

    if equalize:
        dec_in_c, singular = ofdm.equalize_zf(rx_freq, realization.h)
    else:
        dec_in_c, singular = rx_freq, np.zeros(rx_freq.shape, dtype=bool)
    dec_in = ofdm.to_reals(dec_in_c)

    dec_out, dec_layers = fwd(model.decoder, dec_in)

    rx_symbols = ofdm.to_complex(dec_out)
    decoded = ofdm.qam4_demodulate(rx_symbols)

    taps = {
        "tx_symbols": tx_symbols, "encoded": encoded, "tx_time": tx_time,
        "rx_freq": rx_freq, "dec_input": dec_in, "singular": singular,
        "rx_symbols": rx_symbols, "encoder_layers": enc_layers,
        "decoder_layers": dec_layers,
    }
    if single:
        decoded = decoded[0]
    return decoded, taps


# ---------------------------------------------------------------------------
# Training (float only; quantization happens after delivery)
# ---------------------------------------------------------------------------

def _chain_forward(model, x0, h, noise, equalize):
    """Float chain from modulated reals to decoder output, with caches."""
    enc_acts, enc_pre = nn._forward_cached(model.encoder, x0)
    enc_out = enc_acts[-1]
    s = np.sqrt(_complex_power(enc_out))
    encoded = enc_out / s

    cp = model.ofdm.cp_len
    tx_freq = ofdm.to_complex(encoded)
    tx_time = ofdm.add_cp(ofdm.ifft(tx_freq), cp)
    rx_freq = ofdm.fft(ofdm.remove_cp(tx_time, cp))
    rx_freq = h * rx_freq + noise

    if equalize:
        dec_in_c, singular = ofdm.equalize_zf(rx_freq, h)
    else:
        dec_in_c, singular = rx_freq, None
    dec_in = ofdm.to_reals(dec_in_c)
    dec_acts, dec_pre = nn._forward_cached(model.decoder, dec_in)
    cache = (enc_acts, enc_pre, enc_out, s, dec_acts, dec_pre, singular)
    return dec_acts[-1], cache


def _chain_backward(model, x0, g_out, cache, h, equalize):
    """Adjoint of _chain_forward w.r.t. both networks' parameters."""
    enc_acts, enc_pre, enc_out, s, dec_acts, dec_pre, singular = cache
    dec_grads, g_dec_in = nn._backward_from(model.decoder, dec_acts, dec_pre,
                                            g_out)
    # real-interleaved gradient -> complex convention (d/dRe + j d/dIm)
    g_c = ofdm.to_complex(g_dec_in)
    if equalize:
        g_c = np.where(singular, 0.0, g_c / np.conj(
            np.where(singular, 1.0, h)))
    g_c = np.conj(h) * g_c              # channel y = h*x + eps
    cp = model.ofdm.cp_len
    g_t = ofdm.ifft(g_c)                # adjoint of fft
    g_tc = np.concatenate(              # adjoint of remove_cp
        [np.zeros(g_t.shape[:-1] + (cp,), dtype=complex), g_t], axis=-1)
    g_time = g_tc[..., cp:].copy()      # adjoint of add_cp
    if cp:
        g_time[..., -cp:] += g_tc[..., :cp]
    g_freq = ofdm.fft(g_time)           # adjoint of ifft
    g_encoded = ofdm.to_reals(g_freq)

    # adjoint of x/s with s = sqrt(c * sum(x^2)), c = 2/size
    c = 2.0 / enc_out.size
    g_enc_out = g_encoded / s \
        - enc_out * (c * np.sum(g_encoded * enc_out) / s ** 3)
    enc_grads, _ = nn._backward_from(model.encoder, enc_acts, enc_pre,
                                     g_enc_out)
    return enc_grads, dec_grads


def chain_loss_and_grads(model, x0, h, noise, equalize=True):
    """Loss and exact parameter gradients through the whole link.

    The gains h and the additive noise draw are treated as constants, so
    this matches finite differences of the loss at fixed h and noise.
    """
    r_hat, cache = _chain_forward(model, x0, h, noise, equalize)
    diff = r_hat - x0
    batch_loss = float(np.mean(diff ** 2))
    g_out = 2.0 * diff / diff.size
    enc_grads, dec_grads = _chain_backward(model, x0, g_out, cache, h,
                                           equalize)
    return batch_loss, enc_grads, dec_grads


def calibrate_ranges(model: AutoencoderModel, rng: np.random.Generator,
                     n_blocks: int = 2000, target: float = 4.0,
                     percentile: float = 99.9) -> AutoencoderModel:
    """Rebalance per-layer scales so activations fit a fixed-point range.

    Relu is positively homogeneous, so scaling a layer's (W, b) by g and
    the next layer's W by 1/g leaves the network function unchanged; the
    power normalization absorbs the encoder's output scale.  Each hidden
    tap is scaled so its |activation| percentile sits at `target`
    (percentile rather than max: wider layers would otherwise be governed
    by their outliers), keeping the fixed-point datapath clear of
    saturation without touching what the float network computes.  The
    decoder's final layer is left alone (its output is the
    reconstruction).
    """
    model = AutoencoderModel(model.encoder.copy(), model.decoder.copy(),
                             model.ofdm, model.rate)
    block = random_block(n_blocks, model.ofdm, rng)

    def rebalance(net, x, skip_last):
        _, taps = nn.forward_float(net, x)
        g_prev = 1.0
        for i, layer in enumerate(net.layers):
            if skip_last and i == len(net.layers) - 1:
                g = 1.0
            else:
                peak = float(np.percentile(np.abs(taps[i]), percentile))
                g = target / peak if peak > 0 else 1.0
            layer.w *= g / g_prev
            layer.b *= g
            g_prev = g

    rebalance(model.encoder, block.reals, skip_last=False)
    enc_out, _ = nn.forward_float(model.encoder, block.reals)
    dec_in, _ = normalize_power(enc_out)
    rebalance(model.decoder, dec_in, skip_last=True)
    return model


@dataclass
class TrainResult:
    model: AutoencoderModel
    loss_history: list[float]


def train(model: AutoencoderModel, cfg: TrainConfig, channel: str = "awgn",
          equalize: bool | None = None,
          rng: np.random.Generator | None = None) -> TrainResult:
    """Joint training of encoder and decoder with the channel in the loop.

    Each batch draws fresh bits, gains, per-block SNR uniform over
    cfg.snr_range_db, and noise.  Deterministic for a given cfg.seed when
    no explicit rng is supplied.  Raises TrainingDiverged on NaN loss.
    The returned model has been range-calibrated (see calibrate_ranges)
    so it is ready for fixed-point delivery.
    """
    if equalize is None:
        equalize = channel == "rayleigh"
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    model = AutoencoderModel(model.encoder.copy(), model.decoder.copy(),
                             model.ofdm, model.rate)
    params = model.encoder.parameters() + model.decoder.parameters()
    n_enc = len(model.encoder.parameters())
    state = None
    history = []
    n_tx = model.n_tx_subcarriers
    lo, hi = cfg.snr_range_db
    for _ in range(cfg.epochs):
        epoch_loss = 0.0
        for _ in range(cfg.batches_per_epoch):
            block = random_block(cfg.batch_size, model.ofdm, rng)
            x0 = block.reals
            chan = ofdm.draw_channel(channel, (cfg.batch_size, n_tx),
                                     0.0, rng)
            snr = rng.uniform(lo, hi, size=(cfg.batch_size, 1))
            sigma = np.sqrt(10.0 ** (-snr / 10.0) / 2.0)
            noise = sigma * (rng.standard_normal((cfg.batch_size, n_tx))
                             + 1j * rng.standard_normal(
                                 (cfg.batch_size, n_tx)))
            batch_loss, enc_g, dec_g = chain_loss_and_grads(
                model, x0, chan.h, noise, equalize)
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(
                    f"loss became {batch_loss} at epoch {len(history) + 1}")
            params, state = nn.optimizer_step(params, enc_g + dec_g, state,
                                              cfg)
            model.encoder.set_parameters(params[:n_enc])
            model.decoder.set_parameters(params[n_enc:])
            epoch_loss += batch_loss
        history.append(epoch_loss / cfg.batches_per_epoch)
    return TrainResult(calibrate_ranges(model, rng), history)
