"""Step-wise room-center prediction.

The design state is a (K+4)-channel binary raster: boundary, front door,
interior, one center-stamp channel per room type, and a summary channel
holding all stamps. Given the state and the next desired room type, the
network classifies every pixel into K+3 labels (the K types plus EXISTING,
FREE and OUTSIDE) and the next center is decoded from the class map of the
requested type.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .core import RESOLUTION, Boundary, Layout, RoomTypeRegistry, stamp_center
from .errors import (
    CheckpointError,
    DataError,
    DomainError,
    NoFreeSpace,
    RegistryError,
    ShapeError,
)

# label layout: 0..K-1 room types, then the three non-type labels
TYPE_WEIGHT = 2.0
OTHER_WEIGHT = 1.25


def label_existing(k: int) -> int:
    return k


def label_free(k: int) -> int:
    return k + 1


def label_outside(k: int) -> int:
    return k + 2


def build_state(
    boundary: Boundary,
    placed: Sequence[tuple[int, tuple[int, int]]],
    registry: RoomTypeRegistry,
) -> np.ndarray:
    """(K+4, 128, 128) binary state; independent of the order of ``placed``."""
    k = registry.size
    state = np.zeros((k + 4, RESOLUTION, RESOLUTION), dtype=np.float32)
    state[0] = boundary.boundary_mask
    state[1] = boundary.frontdoor_mask
    state[2] = boundary.interior_mask
    for type_id, center in placed:
        registry.check_type_id(type_id)
        stamp_center(state[3 + type_id], center)
    state[3 + k] = state[3 : 3 + k].max(axis=0)
    return state


class ResidualBlock(nn.Module):
    def __init__(self, cin: int, cout: int, stride: int = 1, dilation: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(
            cin, cout, 3, stride=stride, padding=dilation, dilation=dilation, bias=False
        )
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=dilation, dilation=dilation, bias=False)
        self.bn2 = nn.BatchNorm2d(cout)
        if stride != 1 or cin != cout:
            self.shortcut = nn.Sequential(
                nn.Conv2d(cin, cout, 1, stride=stride, bias=False), nn.BatchNorm2d(cout)
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x))


class StateBackbone(nn.Module):
    """Residual feature extractor, four stages of two blocks each.

    The last two stages trade stride for dilation so the output stays at
    1/8 resolution (16x16), which the pyramid decoder needs.
    """

    def __init__(self, in_channels: int, width_factor: float = 0.25):
        super().__init__()
        w = max(int(64 * width_factor), 8)
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, w, 7, stride=2, padding=3, bias=False),
            nn.BatchNorm2d(w),
            nn.ReLU(),
            nn.MaxPool2d(3, stride=2, padding=1),
        )
        self.layer1 = nn.Sequential(ResidualBlock(w, w), ResidualBlock(w, w))
        self.layer2 = nn.Sequential(ResidualBlock(w, 2 * w, stride=2), ResidualBlock(2 * w, 2 * w))
        self.layer3 = nn.Sequential(
            ResidualBlock(2 * w, 4 * w, dilation=2), ResidualBlock(4 * w, 4 * w, dilation=2)
        )
        self.layer4 = nn.Sequential(
            ResidualBlock(4 * w, 8 * w, dilation=4), ResidualBlock(8 * w, 8 * w, dilation=4)
        )
        self.out_channels = 8 * w

    def forward(self, x):
        x = self.stem(x)
        x = self.layer1(x)
        x = self.layer2(x)
        x = self.layer3(x)
        return self.layer4(x)


class TypeBranch(nn.Module):
    """Embeds the one-hot room type into a 16x16 feature map."""

    def __init__(self, k: int, channels: int = 8, grid: int = 16):
        super().__init__()
        self.grid = grid
        self.channels = channels
        self.fc = nn.Sequential(
            nn.Linear(k, 64),
            nn.ReLU(),
            nn.Linear(64, 128),
            nn.ReLU(),
            nn.Linear(128, channels * grid * grid),
        )
        convs = []
        for _ in range(4):
            convs.extend(
                [nn.Conv2d(channels, channels, 3, padding=1), nn.BatchNorm2d(channels), nn.LeakyReLU(0.2)]
            )
        self.convs = nn.Sequential(*convs)

    def forward(self, onehot):
        x = self.fc(onehot).view(-1, self.channels, self.grid, self.grid)
        return self.convs(x)


class PyramidBlock(nn.Module):
    """Parallel dilated branches plus pooled context, projected back down."""

    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.branch1 = nn.Sequential(nn.Conv2d(cin, cout, 1, bias=False), nn.BatchNorm2d(cout), nn.ReLU())
        self.branch2 = nn.Sequential(
            nn.Conv2d(cin, cout, 3, padding=2, dilation=2, bias=False), nn.BatchNorm2d(cout), nn.ReLU()
        )
        self.branch3 = nn.Sequential(
            nn.Conv2d(cin, cout, 3, padding=4, dilation=4, bias=False), nn.BatchNorm2d(cout), nn.ReLU()
        )
        self.branch4 = nn.Sequential(
            nn.Conv2d(cin, cout, 3, padding=6, dilation=6, bias=False), nn.BatchNorm2d(cout), nn.ReLU()
        )
        self.pool = nn.Sequential(
            nn.AdaptiveAvgPool2d(1), nn.Conv2d(cin, cout, 1, bias=False), nn.BatchNorm2d(cout), nn.ReLU()
        )
        self.project = nn.Sequential(
            nn.Conv2d(5 * cout, cout, 1, bias=False), nn.BatchNorm2d(cout), nn.ReLU()
        )

    def forward(self, x):
        size = x.shape[-2:]
        pooled = F.interpolate(self.pool(x), size=size, mode="bilinear", align_corners=False)
        stacked = torch.cat(
            [self.branch1(x), self.branch2(x), self.branch3(x), self.branch4(x), pooled], dim=1
        )
        return self.project(stacked)


class CenterLocator(nn.Module):
    def __init__(self, k: int, width_factor: float = 0.25, decoder_channels: int = 64):
        super().__init__()
        self.k = k
        self.width_factor = width_factor
        self.backbone = StateBackbone(k + 4, width_factor)
        self.type_branch = TypeBranch(k)
        cin = self.backbone.out_channels + self.type_branch.channels
        blocks = [PyramidBlock(cin, decoder_channels)]
        for _ in range(3):
            blocks.append(PyramidBlock(decoder_channels, decoder_channels))
        self.pyramid = nn.Sequential(*blocks)
        self.head_conv = nn.Sequential(
            nn.Conv2d(decoder_channels, decoder_channels, 3, padding=1, bias=False),
            nn.BatchNorm2d(decoder_channels),
            nn.ReLU(),
        )
        self.deconv = nn.ConvTranspose2d(decoder_channels, k + 3, kernel_size=8, stride=8)

    def forward(self, state, onehot):
        feats = self.backbone(state)
        tfeat = self.type_branch(onehot)
        x = torch.cat([feats, tfeat], dim=1)
        x = self.pyramid(x)
        x = self.head_conv(x)
        return self.deconv(x)


def one_hot(type_id: int, k: int) -> np.ndarray:
    vec = np.zeros(k, dtype=np.float32)
    vec[type_id] = 1.0
    return vec


def locator_forward(net: CenterLocator, state: np.ndarray, type_id: int) -> np.ndarray:
    if state.shape != (net.k + 4, RESOLUTION, RESOLUTION):
        raise ShapeError(f"state shape {state.shape} does not match K={net.k}")
    net.eval()
    with torch.no_grad():
        logits = net(
            torch.from_numpy(np.ascontiguousarray(state, dtype=np.float32)).unsqueeze(0),
            torch.from_numpy(one_hot(type_id, net.k)).unsqueeze(0),
        )
    return logits.squeeze(0).numpy()


def class_weights(k: int) -> torch.Tensor:
    w = torch.full((k + 3,), OTHER_WEIGHT)
    w[:k] = TYPE_WEIGHT
    return w


def locator_loss(logits, target, k: int) -> torch.Tensor:
    """Weighted pixel cross-entropy summed over the canvas.

    Batched inputs (B, K+3, H, W) average the per-image sums over the batch.
    The floating dtype of ``logits`` is preserved.
    """
    logits = torch.as_tensor(logits)
    if not logits.is_floating_point():
        logits = logits.float()
    target = torch.as_tensor(target, dtype=torch.int64)
    squeeze = logits.ndim == 3
    if squeeze:
        logits = logits.unsqueeze(0)
        target = target.unsqueeze(0)
    if target.min() < 0 or target.max() >= k + 3:
        raise DomainError(f"labels must lie in [0, {k + 3})")
    weights = class_weights(k).to(logits.dtype)
    loss = F.cross_entropy(logits, target, weight=weights, reduction="sum")
    return loss / logits.shape[0]


def make_training_example(
    layout: Layout, registry: RoomTypeRegistry, rng: np.random.Generator
) -> tuple[np.ndarray, int, np.ndarray]:
    """Drop a random subset of rooms, pick an unplaced room as the target.

    The target grid labels the chosen room's stamp with its type, kept
    stamps EXISTING, the rest of the interior FREE and everything else
    OUTSIDE.
    """
    n = layout.n_rooms
    if n < 1:
        raise DataError("layout has no rooms")
    keep_count = int(rng.integers(0, n))
    keep = set(rng.choice(n, size=keep_count, replace=False).tolist())
    removed = [i for i in range(n) if i not in keep]
    next_idx = removed[int(rng.integers(len(removed)))]

    placed = [(layout.rooms[i].type_id, layout.rooms[i].center) for i in sorted(keep)]
    state = build_state(layout.boundary, placed, registry)

    k = registry.size
    target = np.full((RESOLUTION, RESOLUTION), label_outside(k), dtype=np.int64)
    target[layout.boundary.interior_mask == 1] = label_free(k)
    scratch = np.zeros((RESOLUTION, RESOLUTION), dtype=np.float32)
    for i in sorted(keep):
        scratch[:] = 0
        stamp_center(scratch, layout.rooms[i].center)
        target[scratch == 1] = label_existing(k)
    scratch[:] = 0
    stamp_center(scratch, layout.rooms[next_idx].center)
    target[scratch == 1] = layout.rooms[next_idx].type_id
    return state, layout.rooms[next_idx].type_id, target


def admissible_mask(state: np.ndarray, k: int) -> np.ndarray:
    """Interior pixels not already claimed by a placed-center stamp."""
    return (state[2] > 0.5) & (state[3 + k] < 0.5)


def predict_center(
    net: CenterLocator,
    state: np.ndarray,
    type_id: int,
    mode: str = "argmax",
    rng: np.random.Generator | None = None,
    temperature: float = 1.0,
) -> tuple[int, int]:
    logits = locator_forward(net, state, type_id)
    mask = admissible_mask(state, net.k)
    if not mask.any():
        raise NoFreeSpace("no admissible pixel for a new center")
    shifted = logits - logits.max(axis=0)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=0))
    score = log_probs[type_id]
    flat = np.where(mask.reshape(-1), score.reshape(-1), -np.inf)
    if mode == "argmax":
        idx = int(flat.argmax())
    elif mode == "sample":
        if rng is None:
            raise DomainError("sampling requires an rng")
        scaled = flat / max(temperature, 1e-6)
        scaled -= scaled.max()
        probs = np.exp(scaled)
        probs[~np.isfinite(probs)] = 0.0
        total = probs.sum()
        if total <= 0:
            raise NoFreeSpace("probability mass vanished on admissible pixels")
        idx = int(rng.choice(probs.shape[0], p=probs / total))
    else:
        raise DomainError(f"unknown decode mode {mode!r}")
    return idx // RESOLUTION, idx % RESOLUTION


EditHook = Callable[[int, int, tuple[int, int]], tuple[int, int] | None]


def locate_all(
    net: CenterLocator,
    boundary: Boundary,
    types: Sequence[int],
    registry: RoomTypeRegistry,
    rng: np.random.Generator | None = None,
    mode: str = "argmax",
    temperature: float = 1.0,
    edits: EditHook | None = None,
) -> list[tuple[int, int]]:
    """Run the placement chain over ``types``, applying edits step by step."""
    if not types:
        raise DataError("types must be non-empty")
    placed: list[tuple[int, tuple[int, int]]] = []
    centers: list[tuple[int, int]] = []
    for j, type_id in enumerate(types):
        registry.check_type_id(type_id)
        state = build_state(boundary, placed, registry)
        try:
            center = predict_center(net, state, type_id, mode=mode, rng=rng, temperature=temperature)
        except NoFreeSpace as exc:
            raise NoFreeSpace(f"step {j}: {exc}", step=j) from exc
        if edits is not None:
            replacement = edits(j, type_id, center)
            if replacement is not None:
                center = (int(replacement[0]), int(replacement[1]))
        placed.append((type_id, center))
        centers.append(center)
    return centers


@dataclass
class LocatorConfig:
    width_factor: float = 0.25
    decoder_channels: int = 64
    lr: float = 1e-3
    batch_size: int = 8
    steps: int = 1500
    # step-decay milestones as fractions of the step budget
    lr_milestones: tuple[float, ...] = (0.5, 0.75)
    lr_decay: float = 0.3


def train_locator(
    corpus,
    registry: RoomTypeRegistry,
    config: LocatorConfig | None = None,
    rng: np.random.Generator | None = None,
    progress: Callable[[int, float], None] | None = None,
    early_stop: Callable[[int, "CenterLocator"], bool] | None = None,
    eval_every: int = 150,
) -> tuple[CenterLocator, list[float]]:
    if not corpus:
        raise DataError("cannot train on an empty corpus")
    config = config or LocatorConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    torch.manual_seed(int(rng.integers(2**31)))

    net = CenterLocator(
        registry.size, width_factor=config.width_factor, decoder_channels=config.decoder_channels
    )
    opt = torch.optim.Adam(net.parameters(), lr=config.lr)
    milestones = {int(f * config.steps) for f in config.lr_milestones}
    trace = []
    net.train()
    for step in range(config.steps):
        if step in milestones:
            for group in opt.param_groups:
                group["lr"] *= config.lr_decay
        states, onehots, targets = [], [], []
        for _ in range(config.batch_size):
            layout = corpus[int(rng.integers(len(corpus)))]
            state, type_id, target = make_training_example(layout, registry, rng)
            states.append(state)
            onehots.append(one_hot(type_id, registry.size))
            targets.append(target)
        logits = net(
            torch.from_numpy(np.stack(states)), torch.from_numpy(np.stack(onehots))
        )
        loss = locator_loss(logits, np.stack(targets), registry.size)
        if not torch.isfinite(loss):
            raise DataError(f"non-finite loss at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        trace.append(loss.item())
        if progress is not None:
            progress(step, trace[-1])
        if early_stop is not None and (step + 1) % eval_every == 0:
            net.eval()
            done = early_stop(step, net)
            net.train()
            if done:
                break
    net.eval()
    return net, trace


def save_checkpoint(net: CenterLocator, registry: RoomTypeRegistry, path) -> None:
    torch.save(
        {
            "kind": "locator",
            "k": net.k,
            "width_factor": net.width_factor,
            "decoder_channels": net.deconv.in_channels,
            "label_order": list(registry.names) + ["EXISTING", "FREE", "OUTSIDE"],
            "registry_hash": registry.content_hash(),
            "state_dict": net.state_dict(),
        },
        path,
    )


def load_checkpoint(path, registry: RoomTypeRegistry) -> CenterLocator:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("kind") != "locator":
        raise CheckpointError(f"not a locator checkpoint: {path}")
    if payload["k"] != registry.size:
        raise RegistryError(
            f"checkpoint has K={payload['k']} but registry has K={registry.size}"
        )
    net = CenterLocator(
        payload["k"],
        width_factor=payload["width_factor"],
        decoder_channels=payload["decoder_channels"],
    )
    net.load_state_dict(payload["state_dict"])
    net.eval()
    return net
