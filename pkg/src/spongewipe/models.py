"""Learned components and their trainers.

Three models, trained in sequence:

    SpongeVAE      beta-VAE over normalized 400x6 exploratory FT trajectories;
                   its 5-d posterior mean is the sponge-property feature z
    TrajDecoder    z -> normalized 25-step wiping path (one linear map)
    FTFeedback     causal conv stack over a short window of recent FT samples,
                   fused with z, -> next vertical displacement (normalized)

The VAE is pretrained on randomized simulated sponges; the other two are fit
on the expert demonstrations with the encoder frozen.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import pipeline
from .nn import (
    Adam,
    CheckpointError,
    DenseLayer,
    TcnLayer,
    collect_grads,
    dense_forward,
    kl_diag_gaussian,
    load_layers,
    mse,
    save_layers,
    tcn_forward,
)
from .nn import autodiff as ad
from .nn.autodiff import Tensor
from .rng import Rng

LATENT_DIM = 5
BETA = 0.06
EXPLORE_STEPS = 400
FT_CHANNELS = 6

VAE_EPOCHS = 200
VAE_LR = 1e-4
TRAJ_EPOCHS = 10000
TRAJ_LR = 1e-3
FT_EPOCHS = 2000
FT_LR = 1e-3

WINDOW = 5
TCN_CHANNELS = 25
TCN_KERNEL = 3
HEIGHT_HIDDEN = 128
DROPOUT = 0.1

PATH_OUTPUT = 50  # 25 steps x (x, y)


@dataclass
class TrainReport:
    """Loss trace from one training run."""

    losses: list = field(default_factory=list)
    epochs: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def final_loss(self):
        return self.losses[-1] if self.losses else float("nan")


# ---------------------------------------------------------------------------
# Sponge-property VAE


@dataclass
class SpongeVAE:
    enc_step: DenseLayer   # per-sample 6 -> latent features
    enc_out: DenseLayer    # flattened sequence -> mu || logvar
    dec_in: DenseLayer     # z -> flattened sequence features
    dec_step: DenseLayer   # per-sample features -> 6

    @classmethod
    def create(cls, rng: Rng):
        return cls(
            enc_step=DenseLayer.create(FT_CHANNELS, LATENT_DIM, "relu",
                                       rng.child("enc_step")),
            enc_out=DenseLayer.create(EXPLORE_STEPS * LATENT_DIM,
                                      2 * LATENT_DIM, "none",
                                      rng.child("enc_out")),
            dec_in=DenseLayer.create(LATENT_DIM,
                                     EXPLORE_STEPS * LATENT_DIM, "relu",
                                     rng.child("dec_in")),
            dec_step=DenseLayer.create(LATENT_DIM, FT_CHANNELS, "none",
                                       rng.child("dec_step")),
        )

    @property
    def params(self):
        return (self.enc_step.params + self.enc_out.params
                + self.dec_in.params + self.dec_step.params)

    @property
    def layers(self):
        return [self.enc_step, self.enc_out, self.dec_in, self.dec_step]

    def encode(self, x):
        """Normalized (N, 400, 6) -> (mu, logvar), each (N, 5)."""
        x = ad.as_tensor(x)
        if x.data.ndim != 3 or x.shape[1:] != (EXPLORE_STEPS, FT_CHANNELS):
            raise ValueError(f"encoder wants (N, 400, 6), got {x.shape}")
        n = x.shape[0]
        h = dense_forward(
            ad.reshape(x, (n * EXPLORE_STEPS, FT_CHANNELS)), self.enc_step)
        h = ad.reshape(h, (n, EXPLORE_STEPS * LATENT_DIM))
        out = dense_forward(h, self.enc_out)
        mu = ad.narrow(out, 1, 0, LATENT_DIM)
        logvar = ad.narrow(out, 1, LATENT_DIM, LATENT_DIM)
        return mu, logvar

    def decode(self, z, training=False, rng: Rng | None = None):
        """(N, 5) latent -> normalized (N, 400, 6) reconstruction."""
        z = ad.as_tensor(z)
        n = z.shape[0]
        h = dense_forward(z, self.dec_in, DROPOUT, training, rng)
        h = ad.reshape(h, (n * EXPLORE_STEPS, LATENT_DIM))
        y = dense_forward(h, self.dec_step)
        return ad.reshape(y, (n, EXPLORE_STEPS, FT_CHANNELS))


def vae_loss(model: SpongeVAE, x, rng: Rng, training=True):
    """Reconstruction MSE + BETA * per-sample KL; returns (loss, parts)."""
    x = ad.as_tensor(x)
    n = x.shape[0]
    mu, logvar = model.encode(x)
    eps = Tensor(rng.child("reparam").normal(size=mu.shape))
    z = ad.add(mu, ad.mul(ad.exp(ad.mul(logvar, 0.5)), eps))
    recon = model.decode(z, training, rng.child("dropout") if training else None)
    rec_loss = mse(recon, x)
    kl = ad.mul(kl_diag_gaussian(mu, logvar), 1.0 / n)
    loss = ad.add(rec_loss, ad.mul(kl, BETA))
    return loss, {"recon": rec_loss.item(), "kl": kl.item()}


def pretrain_vae(trajectories, stats: pipeline.NormStats, rng: Rng,
                 epochs=VAE_EPOCHS, lr=VAE_LR):
    """Full-batch Adam on normalized exploratory trajectories."""
    x = np.stack([stats.ft.normalize(t.samples) for t in trajectories])
    model = SpongeVAE.create(rng.child("init"))
    opt = Adam(model.params, lr=lr)
    report = TrainReport(epochs=epochs)
    for epoch in range(epochs):
        loss, parts = vae_loss(model, x, rng.child(f"epoch{epoch}"))
        loss.backward()
        opt.step(collect_grads(model.params))
        report.losses.append(loss.item())
    report.extras["final_parts"] = parts
    return model, report


def encode_sponge(model: SpongeVAE, traj_samples, stats: pipeline.NormStats):
    """Posterior mean for one raw 400x6 trajectory; deterministic."""
    x = stats.ft.normalize(np.asarray(traj_samples))[None]
    mu, _ = model.encode(x)
    return mu.data[0].copy()


# ---------------------------------------------------------------------------
# Trajectory decoder


@dataclass
class TrajDecoder:
    out: DenseLayer  # 5 -> 50

    @classmethod
    def create(cls, rng: Rng):
        return cls(out=DenseLayer.create(LATENT_DIM, PATH_OUTPUT, "none", rng))

    @property
    def params(self):
        return self.out.params


def train_traj_decoder(records, vae: SpongeVAE, explore_stats, demo_stats,
                       rng: Rng, epochs=TRAJ_EPOCHS, lr=TRAJ_LR):
    """Fit z -> normalized flattened xy path on the demos; encoder frozen."""
    z = np.stack([
        encode_sponge(vae, r.exploratory.samples, explore_stats)
        for r in records
    ])
    targets = np.stack([
        demo_stats.xy.normalize(r.demo.xy).reshape(-1) for r in records
    ])
    model = TrajDecoder.create(rng.child("init"))
    opt = Adam(model.params, lr=lr)
    report = TrainReport(epochs=epochs)
    zt = Tensor(z)
    tt = Tensor(targets)
    for epoch in range(epochs):
        pred = dense_forward(zt, model.out, DROPOUT, training=True,
                             rng=rng.child(f"epoch{epoch}"))
        loss = mse(pred, tt)
        loss.backward()
        opt.step(collect_grads(model.params))
        report.losses.append(loss.item())
    return model, report


def decode_path(model: TrajDecoder, z, demo_stats: pipeline.NormStats):
    """Latent -> denormalized (25, 2) wiping path."""
    pred = dense_forward(Tensor(np.asarray(z)), model.out)
    return demo_stats.xy.denormalize(pred.data.reshape(-1, 2))


# ---------------------------------------------------------------------------
# FT feedback loop


@dataclass
class FTFeedback:
    tcn_layers: list          # causal conv stack over the FT window
    to_feature: DenseLayer    # conv features -> 6-d force feature
    head_hidden: DenseLayer   # (force feature || z) -> hidden
    head_out: DenseLayer      # hidden -> normalized dh
    window: int = WINDOW

    @classmethod
    def create(cls, rng: Rng, n_layers=2, window=WINDOW):
        if n_layers < 1:
            raise ValueError("need at least one conv layer")
        layers = []
        for i in range(n_layers):
            in_ch = FT_CHANNELS if i == 0 else TCN_CHANNELS
            layers.append(TcnLayer.create(in_ch, TCN_CHANNELS, TCN_KERNEL,
                                          2 ** i, rng.child(f"tcn{i}")))
        return cls(
            tcn_layers=layers,
            to_feature=DenseLayer.create(TCN_CHANNELS, FT_CHANNELS, "none",
                                         rng.child("to_feature")),
            head_hidden=DenseLayer.create(FT_CHANNELS + LATENT_DIM,
                                          HEIGHT_HIDDEN, "relu",
                                          rng.child("head_hidden")),
            head_out=DenseLayer.create(HEIGHT_HIDDEN, 1, "none",
                                       rng.child("head_out")),
            window=window,
        )

    @property
    def params(self):
        out = []
        for layer in self.tcn_layers:
            out += layer.params
        return out + (self.to_feature.params + self.head_hidden.params
                      + self.head_out.params)

    @property
    def layers(self):
        return self.tcn_layers + [self.to_feature, self.head_hidden,
                                  self.head_out]

    def forward(self, windows, z, training=False, rng: Rng | None = None):
        """Normalized (B, W, 6) windows + (B, 5) latents -> (B, 1) dh."""
        feats = tcn_forward(ad.as_tensor(windows), self.tcn_layers,
                            DROPOUT, training, rng)
        force_feat = dense_forward(feats, self.to_feature)
        h = ad.concat([force_feat, ad.as_tensor(z)], axis=1)
        h = dense_forward(h, self.head_hidden, DROPOUT, training, rng)
        return dense_forward(h, self.head_out)


def build_training_batch(records, vae, explore_stats, demo_stats, window):
    """Stack (window, dh-next) pairs from every demo into training arrays."""
    wins, zs, targets = [], [], []
    for rec in records:
        z = encode_sponge(vae, rec.exploratory.samples, explore_stats)
        for raw, dh_next in pipeline.build_demo_windows(rec.demo, window):
            wins.append(demo_stats.ft.normalize(raw))
            zs.append(z)
            targets.append(float(demo_stats.dh.normalize(dh_next)))
    return np.stack(wins), np.stack(zs), np.array(targets)[:, None]


def train_ft_feedback(records, vae: SpongeVAE, explore_stats, demo_stats,
                      rng: Rng, epochs=FT_EPOCHS, lr=FT_LR, n_layers=2,
                      window=WINDOW):
    """Full-batch Adam over all demo windows; encoder frozen."""
    wins, zs, targets = build_training_batch(records, vae, explore_stats,
                                             demo_stats, window)
    model = FTFeedback.create(rng.child("init"), n_layers, window)
    opt = Adam(model.params, lr=lr)
    report = TrainReport(epochs=epochs,
                         extras={"samples": len(targets), "window": window,
                                 "n_layers": n_layers})
    wt, zt, tt = Tensor(wins), Tensor(zs), Tensor(targets)
    for epoch in range(epochs):
        pred = model.forward(wt, zt, training=True,
                             rng=rng.child(f"epoch{epoch}"))
        loss = mse(pred, tt)
        loss.backward()
        opt.step(collect_grads(model.params))
        report.losses.append(loss.item())
    return model, report


def predict_dh(model: FTFeedback, z, raw_window, demo_stats):
    """One deterministic displacement from a raw zero-padded FT window."""
    raw_window = np.asarray(raw_window)
    if raw_window.shape != (model.window, FT_CHANNELS):
        raise ValueError(
            f"window must be {(model.window, FT_CHANNELS)}, got {raw_window.shape}"
        )
    win = demo_stats.ft.normalize(raw_window)[None]
    out = model.forward(win, np.asarray(z)[None])
    return float(demo_stats.dh.denormalize(out.data[0, 0]))


# ---------------------------------------------------------------------------
# Checkpoints


def save_vae(path, model: SpongeVAE):
    save_layers(path, model.layers, extra={"kind": "sponge_vae"})


def load_vae(path) -> SpongeVAE:
    layers, extra, _ = load_layers(path)
    if extra.get("kind") != "sponge_vae":
        raise CheckpointError(f"not a sponge_vae checkpoint: {extra!r}")
    return SpongeVAE(*layers)


def save_traj_decoder(path, model: TrajDecoder):
    save_layers(path, [model.out], extra={"kind": "traj_decoder"})


def load_traj_decoder(path) -> TrajDecoder:
    layers, extra, _ = load_layers(path)
    if extra.get("kind") != "traj_decoder":
        raise CheckpointError(f"not a traj_decoder checkpoint: {extra!r}")
    return TrajDecoder(out=layers[0])


def save_ft_feedback(path, model: FTFeedback):
    save_layers(path, model.layers,
                extra={"kind": "ft_feedback", "window": model.window,
                       "n_layers": len(model.tcn_layers)})


def load_ft_feedback(path) -> FTFeedback:
    layers, extra, _ = load_layers(path)
    if extra.get("kind") != "ft_feedback":
        raise CheckpointError(f"not an ft_feedback checkpoint: {extra!r}")
    n = extra["n_layers"]
    return FTFeedback(tcn_layers=layers[:n], to_feature=layers[n],
                      head_hidden=layers[n + 1], head_out=layers[n + 2],
                      window=extra["window"])
