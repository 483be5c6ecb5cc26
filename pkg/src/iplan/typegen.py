"""Boundary-conditioned VAE over room-type count vectors.

Models which multiset of room types suits a given boundary. Counts are
expanded to the fixed-length binary form (see core.encode_type_bits), the
boundary is embedded by a small conv stack, and a 32-d latent ties the two
together. Sampling decodes latents drawn from the unit Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .core import Boundary, RoomTypeRegistry, TypeCount, decode_type_bits, encode_type_bits
from .errors import CheckpointError, DataError, DomainError, ShapeError

LOG_EPS = 1e-7


@dataclass
class TypeVaeConfig:
    latent_dim: int = 32
    embed_dim: int = 64
    kl_weight: float = 0.5
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 200


def _conv_bn_relu(cin: int, cout: int) -> list[nn.Module]:
    return [nn.Conv2d(cin, cout, 4, stride=2, padding=1), nn.BatchNorm2d(cout), nn.ReLU()]


class TypeCountVae(nn.Module):
    """Embedding conv stack, Gaussian encoder and sigmoid decoder."""

    def __init__(self, n_bits: int, latent_dim: int = 32, embed_dim: int = 64):
        super().__init__()
        self.n_bits = n_bits
        self.latent_dim = latent_dim
        self.embed_dim = embed_dim
        # six stride-2 conv blocks: 128x128x1 down to 2x2x16, flattened to 64
        channels = [1, 16, 16, 32, 32, 16, 16]
        layers: list[nn.Module] = []
        for cin, cout in zip(channels[:-1], channels[1:]):
            layers.extend(_conv_bn_relu(cin, cout))
        layers.append(nn.Flatten())
        self.embedding = nn.Sequential(*layers)

        self.encoder_trunk = nn.Sequential(
            nn.Linear(n_bits + embed_dim, 128),
            nn.ReLU(),
            nn.Linear(128, 64),
            nn.ReLU(),
        )
        self.head_mu = nn.Linear(64, latent_dim)
        self.head_logvar = nn.Linear(64, latent_dim)

        self.decoder = nn.Sequential(
            nn.Linear(latent_dim + embed_dim, 96),
            nn.ReLU(),
            nn.Linear(96, 64),
            nn.ReLU(),
            nn.Linear(64, n_bits),
            nn.Sigmoid(),
        )

    def embed(self, boundary_img: torch.Tensor) -> torch.Tensor:
        return self.embedding(boundary_img)

    def encode(self, bits: torch.Tensor, gamma: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h = self.encoder_trunk(torch.cat([bits, gamma], dim=-1))
        return self.head_mu(h), self.head_logvar(h)

    def decode(self, z: torch.Tensor, gamma: torch.Tensor) -> torch.Tensor:
        return self.decoder(torch.cat([z, gamma], dim=-1))

    def forward(self, bits: torch.Tensor, boundary_img: torch.Tensor, eps: torch.Tensor):
        gamma = self.embed(boundary_img)
        mu, logvar = self.encode(bits, gamma)
        z = mu + torch.exp(0.5 * logvar) * eps
        return self.decode(z, gamma), mu, logvar


def boundary_tensor(boundary: Boundary) -> torch.Tensor:
    return torch.from_numpy(boundary.composite()).unsqueeze(0).unsqueeze(0)


def embed_boundary(model: TypeCountVae, boundary: Boundary) -> np.ndarray:
    model.eval()
    with torch.no_grad():
        gamma = model.embed(boundary_tensor(boundary))
    return gamma.squeeze(0).numpy()


def encode(model: TypeCountVae, bits, gamma) -> tuple[np.ndarray, np.ndarray]:
    bits = np.asarray(bits, dtype=np.float32).reshape(-1)
    gamma = np.asarray(gamma, dtype=np.float32).reshape(-1)
    if bits.shape[0] != model.n_bits:
        raise ShapeError(f"expected {model.n_bits} bits, got {bits.shape[0]}")
    if gamma.shape[0] != model.embed_dim:
        raise ShapeError(f"expected {model.embed_dim}-d embedding, got {gamma.shape[0]}")
    model.eval()
    with torch.no_grad():
        mu, logvar = model.encode(
            torch.from_numpy(bits).unsqueeze(0), torch.from_numpy(gamma).unsqueeze(0)
        )
    return mu.squeeze(0).numpy(), logvar.squeeze(0).numpy()


def reparameterize(mu, logvar, rng: np.random.Generator) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    if mu.shape != logvar.shape:
        raise ShapeError(f"mu shape {mu.shape} != logvar shape {logvar.shape}")
    eps = rng.standard_normal(mu.shape)
    return mu + np.exp(0.5 * logvar) * eps


def decode(model: TypeCountVae, z, gamma) -> np.ndarray:
    z = np.asarray(z, dtype=np.float32).reshape(-1)
    gamma = np.asarray(gamma, dtype=np.float32).reshape(-1)
    if z.shape[0] != model.latent_dim:
        raise ShapeError(f"expected {model.latent_dim}-d latent, got {z.shape[0]}")
    if gamma.shape[0] != model.embed_dim:
        raise ShapeError(f"expected {model.embed_dim}-d embedding, got {gamma.shape[0]}")
    model.eval()
    with torch.no_grad():
        out = model.decode(torch.from_numpy(z).unsqueeze(0), torch.from_numpy(gamma).unsqueeze(0))
    return out.squeeze(0).numpy()


def vae_loss(bits, predicted, mu, logvar, kl_weight: float = 0.5):
    """Bernoulli reconstruction plus weighted KL to the unit Gaussian.

    1-D inputs give the per-example loss; 2-D (batch, n) inputs average the
    per-example sums over the batch. Returns (total, rec, kl) tensors.
    """
    v = torch.as_tensor(bits, dtype=torch.float32)
    v_hat = torch.as_tensor(predicted, dtype=torch.float32)
    mu = torch.as_tensor(mu, dtype=torch.float32)
    logvar = torch.as_tensor(logvar, dtype=torch.float32)
    if v.shape != v_hat.shape:
        raise ShapeError(f"bits shape {tuple(v.shape)} != prediction {tuple(v_hat.shape)}")
    if torch.any(v_hat < 0) or torch.any(v_hat > 1):
        raise DomainError("predictions must lie in [0, 1]")
    rec_terms = -(
        v * torch.log(torch.clamp(v_hat, min=LOG_EPS))
        + (1 - v) * torch.log(torch.clamp(1 - v_hat, min=LOG_EPS))
    )
    kl_terms = -0.5 * (1 + logvar - mu * mu - torch.exp(logvar))
    if v.ndim == 1:
        rec = rec_terms.sum()
        kl = kl_terms.sum()
    else:
        rec = rec_terms.sum(dim=-1).mean()
        kl = kl_terms.sum(dim=-1).mean()
    return rec + kl_weight * kl, rec, kl


def sample_type_counts(
    model: TypeCountVae,
    boundary: Boundary,
    registry: RoomTypeRegistry,
    rng: np.random.Generator,
    n: int,
) -> list[TypeCount]:
    if n <= 0:
        return []
    gamma = embed_boundary(model, boundary)
    out = []
    for _ in range(n):
        z = rng.standard_normal(model.latent_dim)
        bits = decode(model, z, gamma)
        out.append(decode_type_bits(bits, registry))
    return out


def train_type_vae(
    corpus,
    registry: RoomTypeRegistry,
    config: TypeVaeConfig | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[TypeCountVae, list[dict]]:
    if not corpus:
        raise DataError("cannot train on an empty corpus")
    config = config or TypeVaeConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    torch.manual_seed(int(rng.integers(2**31)))

    bits = np.stack(
        [encode_type_bits(l.type_count(registry), registry) for l in corpus]
    ).astype(np.float32)
    imgs = np.stack([l.boundary.composite() for l in corpus])[:, None].astype(np.float32)

    model = TypeCountVae(
        n_bits=registry.n_bits, latent_dim=config.latent_dim, embed_dim=config.embed_dim
    )
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    n = len(corpus)
    trace = []
    model.train()
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_tot = epoch_rec = epoch_kl = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            vb = torch.from_numpy(bits[idx])
            ib = torch.from_numpy(imgs[idx])
            eps = torch.from_numpy(
                rng.standard_normal((len(idx), config.latent_dim)).astype(np.float32)
            )
            v_hat, mu, logvar = model(vb, ib, eps)
            total, rec, kl = vae_loss(vb, v_hat, mu, logvar, config.kl_weight)
            if not torch.isfinite(total):
                raise DataError(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            total.backward()
            opt.step()
            epoch_tot += total.item() * len(idx)
            epoch_rec += rec.item() * len(idx)
            epoch_kl += kl.item() * len(idx)
        trace.append(
            {
                "epoch": epoch,
                "total": epoch_tot / n,
                "rec": epoch_rec / n,
                "kl": epoch_kl / n,
            }
        )
    model.eval()
    return model, trace


def save_checkpoint(model: TypeCountVae, registry: RoomTypeRegistry, path) -> None:
    torch.save(
        {
            "kind": "typegen",
            "n_bits": model.n_bits,
            "latent_dim": model.latent_dim,
            "embed_dim": model.embed_dim,
            "registry_hash": registry.content_hash(),
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path, registry: RoomTypeRegistry) -> TypeCountVae:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("kind") != "typegen":
        raise CheckpointError(f"not a type-sampler checkpoint: {path}")
    if payload["registry_hash"] != registry.content_hash():
        raise CheckpointError("checkpoint was trained against a different registry")
    model = TypeCountVae(
        n_bits=payload["n_bits"],
        latent_dim=payload["latent_dim"],
        embed_dim=payload["embed_dim"],
    )
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
