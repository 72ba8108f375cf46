"""Recurrent sequence autoencoder over mel spectrograms.

A stack of gated recurrent layers encodes each spectrogram; the concatenated
final hidden states of every layer and direction form the embedding
(layer-major, forward before backward: 2 layers x 2 directions x 256 units =
1024 dims at the default config). A learned projection of the embedding
initializes a unidirectional decoder stack that reproduces the time-reversed
input under teacher forcing. Training minimizes the RMSE of that
reconstruction with Adam.

Everything is plain numpy with hand-written backprop, so gradients can be
validated against central finite differences and training is bit-for-bit
reproducible from the seed.
"""

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from stationprint.errors import ShapeError, TrainingDivergedError

RMSE_GUARD = 1e-12  # avoids 0/0 in the loss gradient at exact reconstruction


@dataclass(frozen=True)
class AutoencoderConfig:
    num_layers: int = 2
    units: int = 256
    bidirectional_encoder: bool = True
    dropout: float = 0.2
    learning_rate: float = 0.001
    batch_size: int = 64
    epochs: int = 64
    seed: int = 0

    @property
    def directions(self) -> int:
        return 2 if self.bidirectional_encoder else 1

    @property
    def embedding_dim(self) -> int:
        return self.num_layers * self.directions * self.units

    def to_json(self) -> dict:
        return {
            "num_layers": self.num_layers,
            "units": self.units,
            "bidirectional_encoder": self.bidirectional_encoder,
            "dropout": self.dropout,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AutoencoderConfig":
        return cls(**obj)


PAPER_PROFILE = AutoencoderConfig()
# same architecture, scaled-down run: bounded sample count, fewer epochs
DESK_PROFILE = replace(PAPER_PROFILE, epochs=10)
DESK_MAX_SAMPLES = 2000

PROFILES = {"paper": PAPER_PROFILE, "desk": DESK_PROFILE}

# RMSE reached by the original seven-day, full-catalog training run of this
# pipeline; reported next to desk-scale losses for context, never a target.
FULL_SCALE_REFERENCE_RMSE = 0.237


def _glorot(rng, shape, dtype):
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _gru_param_names(prefix):
    return [f"{prefix}_W", f"{prefix}_Urz", f"{prefix}_Uc", f"{prefix}_b"]


def _init_gru(params, rng, prefix, in_dim, units, dtype):
    params[f"{prefix}_W"] = _glorot(rng, (in_dim, 3 * units), dtype)
    params[f"{prefix}_Urz"] = _glorot(rng, (units, 2 * units), dtype)
    params[f"{prefix}_Uc"] = _glorot(rng, (units, units), dtype)
    params[f"{prefix}_b"] = np.zeros(3 * units, dtype=dtype)


def _gru_forward(x, h0, W, Urz, Uc, b):
    """Run one gated recurrent layer over x: (B, T, In) -> hidden states (B, T, H).

    Gate order in the fused tensors is [reset | update | candidate]:
        r = sigmoid(x W_r + h U_r + b_r)
        z = sigmoid(x W_z + h U_z + b_z)
        c = tanh(x W_c + (r * h) U_c + b_c)
        h' = z * h + (1 - z) * c
    """
    B, T, _ = x.shape
    H = h0.shape[1]
    a = x.reshape(B * T, -1) @ W
    a += b
    a = a.reshape(B, T, 3 * H)
    hs = np.empty((B, T, H), dtype=x.dtype)
    rs = np.empty_like(hs)
    zs = np.empty_like(hs)
    cs = np.empty_like(hs)
    h_prevs = np.empty_like(hs)
    h = h0
    for t in range(T):
        h_prevs[:, t] = h
        rz = _sigmoid(a[:, t, : 2 * H] + h @ Urz)
        r = rz[:, :H]
        z = rz[:, H:]
        c = np.tanh(a[:, t, 2 * H:] + (r * h) @ Uc)
        h = z * h + (1.0 - z) * c
        rs[:, t] = r
        zs[:, t] = z
        cs[:, t] = c
        hs[:, t] = h
    cache = (x, h_prevs, rs, zs, cs)
    return hs, cache


def _gru_backward(d_hs, d_h_last, cache, W, Urz, Uc):
    """Backprop through one layer; d_hs is the per-step output gradient and
    d_h_last an extra gradient on the final hidden state (embedding path)."""
    x, h_prevs, rs, zs, cs = cache
    B, T, H = h_prevs.shape
    da = np.zeros((B, T, 3 * H), dtype=x.dtype)
    dUrz = np.zeros_like(Urz)
    dUc = np.zeros_like(Uc)
    carry = d_h_last if d_h_last is not None else np.zeros((B, H), dtype=x.dtype)
    for t in range(T - 1, -1, -1):
        dh = d_hs[:, t] + carry
        h_prev = h_prevs[:, t]
        r, z, c = rs[:, t], zs[:, t], cs[:, t]
        dz = dh * (h_prev - c)
        dc = dh * (1.0 - z)
        dh_prev = dh * z
        da_c = dc * (1.0 - c * c)
        d_rh = da_c @ Uc.T
        dUc += (r * h_prev).T @ da_c
        dr = d_rh * h_prev
        dh_prev = dh_prev + d_rh * r
        da_r = dr * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)
        da_rz = np.concatenate([da_r, da_z], axis=1)
        dh_prev = dh_prev + da_rz @ Urz.T
        dUrz += h_prev.T @ da_rz
        da[:, t, : 2 * H] = da_rz
        da[:, t, 2 * H:] = da_c
        carry = dh_prev
    da_flat = da.reshape(B * T, 3 * H)
    x_flat = x.reshape(B * T, -1)
    dW = x_flat.T @ da_flat
    db = da_flat.sum(axis=0)
    dx = (da_flat @ W.T).reshape(x.shape)
    return dx, dW, dUrz, dUc, db, carry


class Autoencoder:
    """Encoder/decoder parameter bundle; immutable shape after construction."""

    def __init__(self, config: AutoencoderConfig, input_shape, dtype=np.float32, params=None):
        self.config = config
        self.input_shape = tuple(input_shape)  # (frames, bands)
        self.dtype = np.dtype(dtype)
        self.training_history = []
        if params is not None:
            self.params = params
            return
        rng = np.random.default_rng(config.seed)
        _, bands = self.input_shape
        H = config.units
        self.params = {}
        in_dim = bands
        for layer in range(config.num_layers):
            _init_gru(self.params, rng, f"enc{layer}_fw", in_dim, H, self.dtype)
            if config.bidirectional_encoder:
                _init_gru(self.params, rng, f"enc{layer}_bw", in_dim, H, self.dtype)
            in_dim = H * config.directions
        for layer in range(config.num_layers):
            self.params[f"dec_init{layer}_W"] = _glorot(rng, (config.embedding_dim, H), self.dtype)
            self.params[f"dec_init{layer}_b"] = np.zeros(H, dtype=self.dtype)
            _init_gru(self.params, rng, f"dec{layer}", bands if layer == 0 else H, H, self.dtype)
        self.params["out_W"] = _glorot(rng, (H, bands), self.dtype)
        self.params["out_b"] = np.zeros(bands, dtype=self.dtype)

    def cast(self, dtype) -> "Autoencoder":
        clone = Autoencoder(
            self.config,
            self.input_shape,
            dtype=dtype,
            params={k: v.astype(dtype) for k, v in self.params.items()},
        )
        clone.training_history = list(self.training_history)
        return clone

    def _check_input(self, x):
        if x.shape[-2:] != self.input_shape:
            raise ShapeError(f"expected spectrograms of shape {self.input_shape}, got {x.shape[-2:]}")

    def _dropout_masks(self, batch, rng):
        """Inverted-dropout masks for every recurrent block boundary."""
        p = self.config.dropout
        cfg = self.config
        T = self.input_shape[0]
        masks = {}
        if p <= 0 or rng is None:
            return None
        keep = 1.0 - p
        width = cfg.units * cfg.directions
        for layer in range(cfg.num_layers - 1):
            masks[f"enc{layer}"] = (rng.random((batch, T, width)) < keep).astype(self.dtype) / keep
        masks["emb"] = (rng.random((batch, cfg.embedding_dim)) < keep).astype(self.dtype) / keep
        for layer in range(cfg.num_layers):
            masks[f"dec{layer}"] = (rng.random((batch, T, cfg.units)) < keep).astype(self.dtype) / keep
        return masks

    def _forward(self, x, masks=None):
        """Full training-path forward; returns (loss, y, cache)."""
        self._check_input(x)
        cfg = self.config
        p = self.params
        B, T, M = x.shape
        H = cfg.units
        zeros = np.zeros((B, H), dtype=self.dtype)

        enc_caches = []
        finals = []
        seq = x
        seq_inputs = []
        for layer in range(cfg.num_layers):
            seq_inputs.append(seq)
            hs_f, cache_f = _gru_forward(
                seq, zeros, p[f"enc{layer}_fw_W"], p[f"enc{layer}_fw_Urz"],
                p[f"enc{layer}_fw_Uc"], p[f"enc{layer}_fw_b"],
            )
            if cfg.bidirectional_encoder:
                hs_b_rev, cache_b = _gru_forward(
                    seq[:, ::-1], zeros, p[f"enc{layer}_bw_W"], p[f"enc{layer}_bw_Urz"],
                    p[f"enc{layer}_bw_Uc"], p[f"enc{layer}_bw_b"],
                )
                out = np.concatenate([hs_f, hs_b_rev[:, ::-1]], axis=2)
                finals.extend([hs_f[:, -1], hs_b_rev[:, -1]])
                enc_caches.append((cache_f, cache_b))
            else:
                out = hs_f
                finals.append(hs_f[:, -1])
                enc_caches.append((cache_f, None))
            if masks is not None and layer < cfg.num_layers - 1:
                out = out * masks[f"enc{layer}"]
            seq = out

        emb = np.concatenate(finals, axis=1)
        emb_used = emb * masks["emb"] if masks is not None else emb

        target = x[:, ::-1]
        dec_in = np.zeros_like(target)
        dec_in[:, 1:] = target[:, :-1]

        dec_caches = []
        dec_h0_acts = []
        dseq = dec_in
        dec_inputs = []
        for layer in range(cfg.num_layers):
            h0 = np.tanh(emb_used @ p[f"dec_init{layer}_W"] + p[f"dec_init{layer}_b"])
            dec_h0_acts.append(h0)
            dec_inputs.append(dseq)
            hs, cache = _gru_forward(
                dseq, h0, p[f"dec{layer}_W"], p[f"dec{layer}_Urz"],
                p[f"dec{layer}_Uc"], p[f"dec{layer}_b"],
            )
            if masks is not None:
                hs = hs * masks[f"dec{layer}"]
            dec_caches.append(cache)
            dseq = hs

        y = dseq.reshape(B * T, H) @ p["out_W"] + p["out_b"]
        y = y.reshape(B, T, M)
        diff = y - target
        loss = float(np.sqrt(np.mean(diff.astype(np.float64) ** 2)))
        cache = {
            "x": x, "target": target, "diff": diff, "loss": loss,
            "enc_caches": enc_caches, "seq_inputs": seq_inputs,
            "emb": emb, "emb_used": emb_used,
            "dec_caches": dec_caches, "dec_h0_acts": dec_h0_acts,
            "dec_top": dseq, "masks": masks,
        }
        return loss, y, cache

    def _backward(self, cache):
        cfg = self.config
        p = self.params
        masks = cache["masks"]
        diff = cache["diff"]
        B, T, M = diff.shape
        H = cfg.units
        grads = {}

        denom = B * T * M * max(cache["loss"], RMSE_GUARD)
        d_y = (diff / denom).astype(self.dtype)

        dec_top = cache["dec_top"].reshape(B * T, H)
        d_y_flat = d_y.reshape(B * T, M)
        grads["out_W"] = dec_top.T @ d_y_flat
        grads["out_b"] = d_y_flat.sum(axis=0)
        d_seq = (d_y_flat @ p["out_W"].T).reshape(B, T, H)

        d_emb_used = np.zeros((B, cfg.embedding_dim), dtype=self.dtype)
        for layer in range(cfg.num_layers - 1, -1, -1):
            if masks is not None:
                d_seq = d_seq * masks[f"dec{layer}"]
            dx, dW, dUrz, dUc, db, d_h0 = _gru_backward(
                d_seq, None, cache["dec_caches"][layer],
                p[f"dec{layer}_W"], p[f"dec{layer}_Urz"], p[f"dec{layer}_Uc"],
            )
            grads[f"dec{layer}_W"] = dW
            grads[f"dec{layer}_Urz"] = dUrz
            grads[f"dec{layer}_Uc"] = dUc
            grads[f"dec{layer}_b"] = db
            h0 = cache["dec_h0_acts"][layer]
            d_pre = d_h0 * (1.0 - h0 * h0)
            grads[f"dec_init{layer}_W"] = cache["emb_used"].T @ d_pre
            grads[f"dec_init{layer}_b"] = d_pre.sum(axis=0)
            d_emb_used += d_pre @ p[f"dec_init{layer}_W"].T
            d_seq = dx  # gradient wrt this layer's inputs

        d_emb = d_emb_used * masks["emb"] if masks is not None else d_emb_used

        d_next_seq = None  # gradient on encoder layer outputs (from the layer above)
        width = H * cfg.directions
        for layer in range(cfg.num_layers - 1, -1, -1):
            if d_next_seq is not None and masks is not None and layer < cfg.num_layers - 1:
                d_next_seq = d_next_seq * masks[f"enc{layer}"]
            if d_next_seq is None:
                d_out = np.zeros((B, T, width), dtype=self.dtype)
            else:
                d_out = d_next_seq
            offset = layer * cfg.directions * H
            d_final_fw = d_emb[:, offset: offset + H]
            cache_f, cache_b = cache["enc_caches"][layer]
            dx_f, dW, dUrz, dUc, db, _ = _gru_backward(
                d_out[:, :, :H], d_final_fw, cache_f,
                p[f"enc{layer}_fw_W"], p[f"enc{layer}_fw_Urz"], p[f"enc{layer}_fw_Uc"],
            )
            grads[f"enc{layer}_fw_W"] = dW
            grads[f"enc{layer}_fw_Urz"] = dUrz
            grads[f"enc{layer}_fw_Uc"] = dUc
            grads[f"enc{layer}_fw_b"] = db
            d_in = dx_f
            if cfg.bidirectional_encoder:
                d_final_bw = d_emb[:, offset + H: offset + 2 * H]
                dx_b_rev, dW, dUrz, dUc, db, _ = _gru_backward(
                    d_out[:, ::-1, H:], d_final_bw, cache_b,
                    p[f"enc{layer}_bw_W"], p[f"enc{layer}_bw_Urz"], p[f"enc{layer}_bw_Uc"],
                )
                grads[f"enc{layer}_bw_W"] = dW
                grads[f"enc{layer}_bw_Urz"] = dUrz
                grads[f"enc{layer}_bw_Uc"] = dUc
                grads[f"enc{layer}_bw_b"] = db
                d_in = d_in + dx_b_rev[:, ::-1]
            d_next_seq = d_in
        return grads

    def loss_and_grads(self, x, masks=None):
        loss, _, cache = self._forward(x, masks)
        return loss, self._backward(cache)

    def encode_batch(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        single = x.ndim == 2
        if single:
            x = x[None]
        self._check_input(x)
        cfg = self.config
        p = self.params
        B = x.shape[0]
        zeros = np.zeros((B, cfg.units), dtype=self.dtype)
        finals = []
        seq = x
        for layer in range(cfg.num_layers):
            hs_f, _ = _gru_forward(
                seq, zeros, p[f"enc{layer}_fw_W"], p[f"enc{layer}_fw_Urz"],
                p[f"enc{layer}_fw_Uc"], p[f"enc{layer}_fw_b"],
            )
            if cfg.bidirectional_encoder:
                hs_b_rev, _ = _gru_forward(
                    seq[:, ::-1], zeros, p[f"enc{layer}_bw_W"], p[f"enc{layer}_bw_Urz"],
                    p[f"enc{layer}_bw_Uc"], p[f"enc{layer}_bw_b"],
                )
                finals.extend([hs_f[:, -1], hs_b_rev[:, -1]])
                seq = np.concatenate([hs_f, hs_b_rev[:, ::-1]], axis=2)
            else:
                finals.append(hs_f[:, -1])
                seq = hs_f
        emb = np.concatenate(finals, axis=1).astype(np.float64)
        return emb[0] if single else emb


def encode(model: Autoencoder, spectrogram) -> np.ndarray:
    """Embed one spectrogram: concatenated final hidden states, length 1024
    at the default config. Deterministic; dropout disabled."""
    return model.encode_batch(np.asarray(spectrogram))


def reconstruct(model: Autoencoder, spectrogram) -> np.ndarray:
    """Teacher-forced reconstruction, re-reversed to input time order.
    Diagnostic companion to the training loss."""
    x = np.asarray(spectrogram, dtype=model.dtype)
    single = x.ndim == 2
    if single:
        x = x[None]
    model._check_input(x)
    _, y, _ = model._forward(x, masks=None)
    out = y[:, ::-1].astype(np.float64)
    return out[0] if single else out


def rmse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.sqrt(np.mean((a - b) ** 2)))


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for key, g in grads.items():
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[key] -= (self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)).astype(params[key].dtype)


def train_autoencoder(dataset, config: AutoencoderConfig, dtype=np.float32) -> Autoencoder:
    """Train on spectrograms of one shared shape; deterministic given config.seed.

    dataset: array (N, frames, bands) or a list of equal-shape 2-D arrays.
    """
    data = np.asarray(dataset, dtype=dtype)
    if data.ndim != 3 or data.shape[0] == 0:
        raise ShapeError("dataset must be a non-empty (N, frames, bands) array")
    model = Autoencoder(config, input_shape=data.shape[1:], dtype=dtype)
    rng = np.random.default_rng(config.seed + 1)  # shuffle/dropout stream
    optimizer = _Adam(model.params, config.learning_rate)
    n = data.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = data[order[start:start + config.batch_size]]
            masks = model._dropout_masks(batch.shape[0], rng)
            loss, grads = model.loss_and_grads(batch, masks)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            optimizer.step(model.params, grads)
            epoch_loss += loss * batch.shape[0]
        model.training_history.append(epoch_loss / n)
    return model


def gradient_check(model: Autoencoder, sample, epsilon: float = 1e-5,
                   n_coords: int = 200, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients
    over a random parameter subset. Runs in float64 with dropout off."""
    work = model.cast(np.float64)
    x = np.asarray(sample, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]

    _, grads = work.loss_and_grads(x)

    names = sorted(work.params)
    sizes = np.array([work.params[k].size for k in names])
    total = int(sizes.sum())
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(n_coords, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    worst = 0.0
    for flat_index in picks:
        slot = int(np.searchsorted(offsets, flat_index, side="right") - 1)
        name = names[slot]
        local = int(flat_index - offsets[slot])
        flat = work.params[name].reshape(-1)
        original = flat[local]
        flat[local] = original + epsilon
        loss_plus, _, _ = work._forward(x)
        flat[local] = original - epsilon
        loss_minus, _, _ = work._forward(x)
        flat[local] = original
        numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
        analytic = float(grads[name].reshape(-1)[local])
        # the 1e-6 floor keeps near-zero gradients from dominating the ratio
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, rel)
    return worst


MODEL_MAGIC = b"SPAE"
MODEL_VERSION = 1


def save_model(model: Autoencoder, path):
    header = {
        "config": model.config.to_json(),
        "input_shape": list(model.input_shape),
        "loss_history": model.training_history,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC + struct.pack("<I", MODEL_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)) + header_bytes)
        fh.write(struct.pack("<I", len(model.params)))
        for name in sorted(model.params):
            tensor = np.ascontiguousarray(model.params[name], dtype="<f4")
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_bytes)) + name_bytes)
            fh.write(struct.pack("<B", tensor.ndim))
            fh.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            fh.write(tensor.tobytes())


def load_model(path) -> Autoencoder:
    data = Path(path).read_bytes()
    if data[:4] != MODEL_MAGIC:
        raise ValueError(f"{path}: not a model file")
    (version,) = struct.unpack("<I", data[4:8])
    if version != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {version}")
    (header_len,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + header_len])
    pos = 12 + header_len
    (count,) = struct.unpack("<I", data[pos:pos + 4])
    pos += 4
    params = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", data[pos:pos + 2])
        pos += 2
        name = data[pos:pos + name_len].decode("utf-8")
        pos += name_len
        ndim = data[pos]
        pos += 1
        shape = struct.unpack(f"<{ndim}I", data[pos:pos + 4 * ndim])
        pos += 4 * ndim
        size = int(np.prod(shape))
        params[name] = np.frombuffer(data[pos:pos + 4 * size], dtype="<f4").reshape(shape).copy()
        pos += 4 * size
    model = Autoencoder(
        AutoencoderConfig.from_json(header["config"]),
        input_shape=tuple(header["input_shape"]),
        dtype=np.float32,
        params=params,
    )
    model.training_history = list(header["loss_history"])
    return model
