"""Conditional GAN over the elliptope.

The generator maps (noise, one-hot regime) to the strict lower triangle
of a correlation matrix through a final Tanh, which guarantees symmetry,
unit diagonal and entries in (-1, 1) by construction; positive
semidefiniteness is restored after sampling by nearest-correlation
projection.  The discriminator scores (lower triangle, one-hot regime)
pairs through a final Sigmoid.

Training uses the non-saturating GAN loss with alternating updates and
is fully deterministic under the configured seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import neural, rng
from .core import nearest_correlation
from .corpus import LabeledCorpus
from .exceptions import ConfigError, TrainingDiverged
from .samplers import RegimeLabel

REGIMES = (RegimeLabel.STRESSED, RegimeLabel.NORMAL, RegimeLabel.RALLY)
_SUPPORTED_DIMS = (16, 32, 80)


@dataclass
class GanConfig:
    dim: int = 16
    noise_dim: int = 64
    regime_count: int = 3
    arch: str = "dense"
    epochs: int = 300
    batch_size: int = 32
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    d_steps_per_g: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dim not in _SUPPORTED_DIMS:
            raise ConfigError(f"dim must be one of {_SUPPORTED_DIMS}")
        if self.batch_size < 8:
            raise ConfigError("batch_size must be >= 8")
        if self.arch not in ("dense", "conv"):
            raise ConfigError("arch must be 'dense' or 'conv'")

    @property
    def tri_len(self) -> int:
        return self.dim * (self.dim - 1) // 2

    def to_dict(self):
        return {
            "dim": self.dim, "noise_dim": self.noise_dim,
            "regime_count": self.regime_count, "arch": self.arch,
            "epochs": self.epochs, "batch_size": self.batch_size,
            "lr_g": self.lr_g, "lr_d": self.lr_d,
            "d_steps_per_g": self.d_steps_per_g, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class GanCheckpoint:
    config: GanConfig
    generator: neural.Network
    discriminator: neural.Network
    epoch: int = 0
    loss_history: list = field(default_factory=list)
    mode_collapse_flag: bool = False

    @property
    def trained(self) -> bool:
        return self.epoch > 0


def tri_indices(dim: int):
    return np.tril_indices(dim, k=-1)


def tri_from_matrix(c: np.ndarray) -> np.ndarray:
    i, j = tri_indices(c.shape[0])
    return c[i, j]


def matrix_from_tri(t: np.ndarray, dim: int) -> np.ndarray:
    c = np.eye(dim)
    i, j = tri_indices(dim)
    c[i, j] = t
    c[j, i] = t
    return c


def one_hot(regime: RegimeLabel, n: int = 3) -> np.ndarray:
    v = np.zeros(n)
    v[REGIMES.index(regime)] = 1.0
    return v


def build(config: GanConfig) -> GanCheckpoint:
    """Untrained generator/discriminator pair for the given config."""
    g = np.random.Generator(np.random.PCG64(rng.mix(config.seed, 0)))
    tri = config.tri_len
    zin = config.noise_dim + config.regime_count
    din = tri + config.regime_count

    if config.arch == "dense":
        gen = neural.Network([
            neural.Dense(zin, 256, g), neural.LeakyReLU(0.2),
            neural.Dense(256, 256, g), neural.LeakyReLU(0.2),
            neural.Dense(256, tri, g), neural.Tanh(),
        ], (zin,))
        disc = neural.Network([
            neural.Dense(din, 256, g), neural.LeakyReLU(0.2),
            neural.Dense(256, 128, g), neural.LeakyReLU(0.2),
            neural.Dense(128, 1, g), neural.Sigmoid(),
        ], (din,))
    else:
        d = config.dim
        if d % 4 != 0:
            raise ConfigError("conv arch requires dim divisible by 4")
        base = d // 4
        ch = 32
        gen = neural.Network([
            neural.Dense(zin, ch * base * base, g), neural.LeakyReLU(0.2),
            neural.Reshape((ch, base, base)),
            neural.ConvTranspose2D(ch, ch // 2, 4, 2, 1, g),
            neural.LeakyReLU(0.2),
            neural.ConvTranspose2D(ch // 2, 1, 4, 2, 1, g),
            neural.Flatten(),
            neural.Dense(d * d, tri, g), neural.Tanh(),
        ], (zin,))
        disc = neural.Network([
            neural.Conv2D(1 + config.regime_count, ch // 2, 4, 2, 1, g),
            neural.LeakyReLU(0.2),
            neural.Conv2D(ch // 2, ch, 4, 2, 1, g), neural.LeakyReLU(0.2),
            neural.Flatten(),
            neural.Dense(ch * base * base, 1, g), neural.Sigmoid(),
        ], (1 + config.regime_count, d, d))
    return GanCheckpoint(config, gen, disc)


def _disc_input(config, tri_batch, onehot_batch):
    """Assemble discriminator input from triangles and one-hot labels."""
    if config.arch == "dense":
        return np.concatenate([tri_batch, onehot_batch], axis=1)
    n = tri_batch.shape[0]
    d = config.dim
    i, j = tri_indices(d)
    img = np.zeros((n, 1 + config.regime_count, d, d), dtype=tri_batch.dtype)
    img[:, 0][:, i, j] = tri_batch
    img[:, 0][:, j, i] = tri_batch
    img[:, 0, np.arange(d), np.arange(d)] = 1.0
    img[:, 1:] = onehot_batch[:, :, None, None]
    return img


def _disc_input_grad_tri(config, dinput):
    """Gradient of the triangle entries given the input gradient."""
    if config.arch == "dense":
        return dinput[:, : -config.regime_count]
    d = config.dim
    i, j = tri_indices(d)
    return dinput[:, 0][:, i, j] + dinput[:, 0][:, j, i]


def _bce_grad(y, target, n):
    """d(BCE)/d(sigmoid output); the sigmoid backward recovers (y - t)/n."""
    denom = np.clip(y * (1.0 - y), 1e-12, None)
    return (y - target) / denom / n


def _bce(y, target):
    eps = 1e-7
    y = np.clip(y, eps, 1 - eps)
    return float(-np.mean(target * np.log(y) + (1 - target) * np.log(1 - y)))


def train(
    ckpt: GanCheckpoint,
    corp: LabeledCorpus,
    progress=None,
) -> GanCheckpoint:
    """Alternating non-saturating GAN training, deterministic under seed."""
    config = ckpt.config
    if corp.dim != config.dim:
        raise ConfigError(f"corpus dim {corp.dim} != config dim {config.dim}")
    present = set(corp.labels())
    if present != set(REGIMES):
        raise ConfigError("corpus must contain all three regime labels")

    tris = np.stack([tri_from_matrix(it.matrix) for it in corp.items]).astype(
        np.float32
    )
    hots = np.stack([one_hot(it.label) for it in corp.items]).astype(np.float32)
    n = tris.shape[0]
    bs = min(config.batch_size, n)

    opt_g = neural.Adam(ckpt.generator, lr=config.lr_g, beta1=0.5)
    opt_d = neural.Adam(ckpt.discriminator, lr=config.lr_d, beta1=0.5)

    gap_streak = 0
    for epoch in range(ckpt.epoch, config.epochs):
        g_epoch = rng.generator(config.seed, 1_000_000 + epoch)
        perm = g_epoch.permutation(n)
        g_losses, d_losses = [], []
        for b0 in range(0, n - bs + 1, bs):
            idx = perm[b0 : b0 + bs]
            real_tri, real_hot = tris[idx], hots[idx]

            for _ in range(config.d_steps_per_g):
                z = g_epoch.standard_normal((bs, config.noise_dim)).astype(
                    np.float32
                )
                fake_hot = np.eye(3, dtype=np.float32)[
                    g_epoch.integers(0, 3, size=bs)
                ]
                gin = np.concatenate([z, fake_hot], axis=1)
                fake_tri, _ = ckpt.generator.forward(gin)

                xr = _disc_input(config, real_tri, real_hot)
                xf = _disc_input(config, fake_tri, fake_hot)
                yr, cr = ckpt.discriminator.forward(xr)
                yf, cf = ckpt.discriminator.forward(xf)
                d_loss = 0.5 * (_bce(yr, 1.0) + _bce(yf, 0.0))
                _, gr = ckpt.discriminator.backward(
                    cr, _bce_grad(yr, 1.0, 2 * bs)
                )
                _, gf = ckpt.discriminator.backward(
                    cf, _bce_grad(yf, 0.0, 2 * bs)
                )
                merged = [
                    {k: gr[i][k] + gf[i][k] for k in gr[i]}
                    for i in range(len(gr))
                ]
                try:
                    opt_d.step(merged)
                except Exception as exc:
                    raise TrainingDiverged(str(exc), last_checkpoint=ckpt)

            z = g_epoch.standard_normal((bs, config.noise_dim)).astype(
                np.float32
            )
            fake_hot = np.eye(3, dtype=np.float32)[
                g_epoch.integers(0, 3, size=bs)
            ]
            gin = np.concatenate([z, fake_hot], axis=1)
            fake_tri, cg = ckpt.generator.forward(gin)
            xf = _disc_input(config, fake_tri, fake_hot)
            yf, cf = ckpt.discriminator.forward(xf)
            g_loss = _bce(yf, 1.0)
            dinput, _ = ckpt.discriminator.backward(
                cf, _bce_grad(yf, 1.0, bs)
            )
            dtri = _disc_input_grad_tri(config, dinput)
            _, gg = ckpt.generator.backward(cg, dtri)
            try:
                opt_g.step(gg)
            except Exception as exc:
                raise TrainingDiverged(str(exc), last_checkpoint=ckpt)

            if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
                raise TrainingDiverged(
                    f"NaN loss at epoch {epoch}", last_checkpoint=ckpt
                )
            g_losses.append(g_loss)
            d_losses.append(d_loss)

        ckpt.loss_history.append(
            (float(np.mean(g_losses)), float(np.mean(d_losses)))
        )
        ckpt.epoch = epoch + 1

        # mode-collapse guard: inter-regime spread of mean correlation
        sf1 = _regime_sf1(ckpt, seed_offset=epoch)
        if max(sf1) - min(sf1) < 0.01:
            gap_streak += 1
            if gap_streak >= 50:
                ckpt.mode_collapse_flag = True
        else:
            gap_streak = 0
        if progress is not None:
            progress(epoch, ckpt.loss_history[-1], sf1)
    return ckpt


def _regime_sf1(ckpt, seed_offset=0, count=16):
    out = []
    for regime in REGIMES:
        t = _raw_tri(ckpt, regime, count, rng.mix(ckpt.config.seed, 77 + seed_offset))
        out.append(float(t.mean()))
    return out


def _raw_tri(ckpt, regime, count, seed):
    g = np.random.Generator(np.random.PCG64(seed))
    z = g.standard_normal((count, ckpt.config.noise_dim)).astype(np.float32)
    hot = np.tile(one_hot(regime).astype(np.float32), (count, 1))
    gin = np.concatenate([z, hot], axis=1)
    t, _ = ckpt.generator.forward(gin)
    return t.astype(np.float64)


@dataclass
class SampleBatch:
    matrices: list
    displacements: list
    projected: bool
    untrained_warning: bool = False


def sample(
    ckpt: GanCheckpoint,
    regime: RegimeLabel,
    count: int,
    seed: int = 0,
    project: bool = True,
) -> SampleBatch:
    """Draw ``count`` conditioned matrices; optionally project onto the
    elliptope, reporting the Frobenius displacement per sample."""
    tri = _raw_tri(ckpt, regime, count, rng.mix(seed, 31))
    mats, disps = [], []
    for k in range(count):
        raw = matrix_from_tri(tri[k], ckpt.config.dim)
        if project:
            proj = nearest_correlation(raw)
            disps.append(float(np.linalg.norm(proj - raw, ord="fro")))
            mats.append(proj)
        else:
            disps.append(0.0)
            mats.append(raw)
    return SampleBatch(mats, disps, project, untrained_warning=not ckpt.trained)


# ---------------------------------------------------------------------------
# checkpoint serialization


def save_checkpoint(ckpt: GanCheckpoint, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    neural.save_network(
        ckpt.generator, directory / "generator", seed=ckpt.config.seed,
        step=ckpt.epoch,
    )
    neural.save_network(
        ckpt.discriminator, directory / "discriminator",
        seed=ckpt.config.seed, step=ckpt.epoch,
    )
    meta = {
        "config": ckpt.config.to_dict(),
        "epoch": ckpt.epoch,
        "loss_history": ckpt.loss_history,
        "mode_collapse_flag": ckpt.mode_collapse_flag,
    }
    (directory / "gan.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True)
    )


def load_checkpoint(directory) -> GanCheckpoint:
    directory = Path(directory)
    meta = json.loads((directory / "gan.json").read_text())
    config = GanConfig.from_dict(meta["config"])
    gen, _ = neural.load_network(directory / "generator")
    disc, _ = neural.load_network(directory / "discriminator")
    return GanCheckpoint(
        config, gen, disc, epoch=meta["epoch"],
        loss_history=[tuple(x) for x in meta["loss_history"]],
        mode_collapse_flag=meta["mode_collapse_flag"],
    )
