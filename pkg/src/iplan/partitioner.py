"""Step-wise room partitioning with an adversarially trained generator.

A box regressor predicts the next room's bounding box from the running
design state, a mask synthesizer turns the box into a soft 128x128 mask,
and blending writes the room's type code into the state. A critic scores
whole state sequences; training follows the Wasserstein objective with a
gradient penalty plus a strong smooth-L1 term on the predicted boxes.

State encoding: exterior pixels are fixed at -1, free interior is 0 and a
room of type t (0-based) fills its pixels with (t + 1) / K.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .core import RESOLUTION, Boundary, RoomTypeRegistry, stamp_center
from .errors import CheckpointError, DataError, RegistryError, SequenceError, ShapeError

MIN_BOX_PIXELS = 3


def type_code(type_id: int, k: int) -> float:
    return (type_id + 1) / k


def initial_state(boundary: Boundary) -> np.ndarray:
    state = np.full((RESOLUTION, RESOLUTION), -1.0, dtype=np.float32)
    state[boundary.interior_mask == 1] = 0.0
    return state


def blend(state: np.ndarray, mask: np.ndarray, code: float) -> np.ndarray:
    """Per-pixel convex write of ``code`` into the state; exterior stays -1."""
    if state.shape != mask.shape:
        raise ShapeError(f"state {state.shape} vs mask {mask.shape}")
    exterior = state <= -1.0
    out = state * (1.0 - mask) + mask * code
    out[exterior] = -1.0
    return out.astype(np.float32)


def hard_box_mask(box, shape=(RESOLUTION, RESOLUTION)) -> np.ndarray:
    mask = np.zeros(shape, dtype=np.float32)
    top, left, bottom, right = box
    r0, c0 = max(int(np.ceil(top)), 0), max(int(np.ceil(left)), 0)
    r1, c1 = min(int(np.ceil(bottom)), shape[0]), min(int(np.ceil(right)), shape[1])
    if r0 < r1 and c0 < c1:
        mask[r0:r1, c0:c1] = 1.0
    return mask


def _conv_unit(cin: int, cout: int) -> list[nn.Module]:
    return [nn.Conv2d(cin, cout, 4, stride=2, padding=1), nn.GroupNorm(1, cout), nn.ReLU()]


class BoxRegressor(nn.Module):
    """Six strided conv units and two fully-connected layers; the sigmoid
    head emits (top, left, bottom, right) in normalized [0, 1] canvas
    coordinates, canonicalized by the caller."""

    CHANNELS = (16, 32, 32, 64, 64, 64)

    def __init__(self, k: int):
        super().__init__()
        self.k = k
        layers: list[nn.Module] = []
        cin = k + 2  # state + center stamp + one-hot type planes
        for cout in self.CHANNELS:
            layers.extend(_conv_unit(cin, cout))
            cin = cout
        self.convs = nn.Sequential(*layers)
        self.fc = nn.Sequential(
            nn.Linear(self.CHANNELS[-1] * 2 * 2, 128), nn.ReLU(), nn.Linear(128, 4)
        )

    def forward(self, x):
        h = self.convs(x).flatten(1)
        return torch.sigmoid(self.fc(h))


class MaskSynth(nn.Module):
    """Six 3x3 conv layers mapping the rasterized box planes to a soft mask."""

    CHANNELS = (8, 16, 16, 16, 8, 1)

    def __init__(self):
        super().__init__()
        layers: list[nn.Module] = []
        cin = 3
        for i, cout in enumerate(self.CHANNELS):
            layers.append(nn.Conv2d(cin, cout, 3, padding=1))
            if i < len(self.CHANNELS) - 1:
                layers.append(nn.ReLU())
            cin = cout
        layers.append(nn.Sigmoid())
        self.net = nn.Sequential(*layers)

    def forward(self, raster):
        return self.net(raster).squeeze(1)


class SequenceCritic(nn.Module):
    """Box-regressor backbone with the last two conv units dropped; scores
    a channel-stacked sequence of design states with one scalar."""

    def __init__(self, max_rooms: int):
        super().__init__()
        self.max_rooms = max_rooms
        channels = BoxRegressor.CHANNELS[:-2]
        layers: list[nn.Module] = []
        cin = max_rooms
        for cout in channels:
            layers.extend(_conv_unit(cin, cout))
            cin = cout
        self.convs = nn.Sequential(*layers)
        self.fc = nn.Linear(channels[-1] * 8 * 8, 1)

    def forward(self, seq):
        return self.fc(self.convs(seq).flatten(1)).squeeze(-1)


@dataclass
class Partitioner:
    box_net: BoxRegressor
    mask_net: MaskSynth
    registry_size: int


def regressor_input(state: np.ndarray, center, type_id: int, k: int) -> np.ndarray:
    stamp = np.zeros((RESOLUTION, RESOLUTION), dtype=np.float32)
    stamp_center(stamp, center)
    planes = np.zeros((k + 2, RESOLUTION, RESOLUTION), dtype=np.float32)
    planes[0] = state
    planes[1] = stamp
    planes[2 + type_id] = 1.0
    return planes


def canonical_norm_box(raw: torch.Tensor) -> torch.Tensor:
    """Reorder a raw (t, l, b, r) prediction so top<bottom and left<right."""
    top = torch.minimum(raw[..., 0], raw[..., 2])
    bottom = torch.maximum(raw[..., 0], raw[..., 2])
    left = torch.minimum(raw[..., 1], raw[..., 3])
    right = torch.maximum(raw[..., 1], raw[..., 3])
    return torch.stack([top, left, bottom, right], dim=-1)


def box_raster(box_norm: torch.Tensor) -> torch.Tensor:
    """Rasterize normalized boxes to (B, 3, H, W) planes: signed row and
    column distances into the box (coordinate ramps) plus a hard inside
    indicator. The ramps are piecewise-linear in the box coordinates, so
    the mask stays differentiable w.r.t. the box."""
    if box_norm.ndim == 1:
        box_norm = box_norm.unsqueeze(0)
    b = box_norm.shape[0]
    device = box_norm.device
    coords = torch.arange(RESOLUTION, dtype=torch.float32, device=device) / RESOLUTION
    rows = coords.view(1, -1, 1)
    cols = coords.view(1, 1, -1)
    top = box_norm[:, 0].view(b, 1, 1)
    left = box_norm[:, 1].view(b, 1, 1)
    bottom = box_norm[:, 2].view(b, 1, 1)
    right = box_norm[:, 3].view(b, 1, 1)
    row_ramp = torch.minimum(rows - top, bottom - rows).expand(b, RESOLUTION, RESOLUTION)
    col_ramp = torch.minimum(cols - left, right - cols).expand(b, RESOLUTION, RESOLUTION)
    inside = ((rows >= top) & (rows < bottom) & (cols >= left) & (cols < right)).float()
    inside = inside.expand(b, RESOLUTION, RESOLUTION)
    return torch.stack([row_ramp, col_ramp, inside], dim=1)


def regress_box(
    gen: Partitioner, state: np.ndarray, center, type_id: int
) -> tuple[np.ndarray, bool]:
    """Predicted pixel-space box for the next room; canonical order.

    A degenerate (sub-pixel) prediction is expanded to a minimum 3x3 box
    centered on the requested pixel and flagged.
    """
    gen.box_net.eval()
    planes = regressor_input(state, center, type_id, gen.registry_size)
    with torch.no_grad():
        raw = gen.box_net(torch.from_numpy(planes).unsqueeze(0))
    box = canonical_norm_box(raw).squeeze(0).numpy() * RESOLUTION
    flagged = False
    top, left, bottom, right = (float(v) for v in box)
    if bottom - top < 1.0 or right - left < 1.0:
        flagged = True
        r, c = center
        half = MIN_BOX_PIXELS // 2
        top = float(np.clip(r - half, 0, RESOLUTION - MIN_BOX_PIXELS))
        left = float(np.clip(c - half, 0, RESOLUTION - MIN_BOX_PIXELS))
        bottom = top + MIN_BOX_PIXELS
        right = left + MIN_BOX_PIXELS
    return np.array([top, left, bottom, right], dtype=np.float64), flagged


def soft_mask(gen: Partitioner, box_pixels) -> np.ndarray:
    gen.mask_net.eval()
    box_norm = torch.as_tensor(np.asarray(box_pixels, dtype=np.float32) / RESOLUTION)
    with torch.no_grad():
        mask = gen.mask_net(box_raster(box_norm))
    return mask.squeeze(0).numpy()


BoxEditHook = Callable[[int, np.ndarray], np.ndarray | None]


def generate_sequence(
    gen: Partitioner,
    boundary: Boundary,
    centers_types: Sequence[tuple[tuple[int, int], int]],
    edits: BoxEditHook | None = None,
    hard_blend: bool = True,
    start_state: np.ndarray | None = None,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Iterate regress -> mask -> blend over the (center, type) chain.

    Returns the list of states after each step and the box per step. With
    ``hard_blend`` the thresholded box is written instead of the soft mask,
    which keeps replay exact; the soft path feeds training.
    """
    if not centers_types:
        raise DataError("need at least one (center, type) pair")
    state = initial_state(boundary) if start_state is None else start_state.copy()
    states: list[np.ndarray] = []
    boxes: list[np.ndarray] = []
    for j, (center, type_id) in enumerate(centers_types):
        try:
            box, _ = regress_box(gen, state, center, type_id)
            if edits is not None:
                replacement = edits(j, box)
                if replacement is not None:
                    box = np.asarray(replacement, dtype=np.float64)
            mask = hard_box_mask(box) if hard_blend else soft_mask(gen, box)
            state = blend(state, mask, type_code(type_id, gen.registry_size))
        except Exception as exc:
            raise SequenceError(f"step {j}: {exc}") from exc
        states.append(state)
        boxes.append(box)
    return states, boxes


def pad_sequence(states: Sequence[np.ndarray], max_rooms: int) -> np.ndarray:
    """Stack states along channels, repeating the final state to max_rooms."""
    if len(states) > max_rooms:
        raise SequenceError(f"{len(states)} states exceed max_rooms={max_rooms}")
    stack = list(states) + [states[-1]] * (max_rooms - len(states))
    return np.stack(stack).astype(np.float32)


def wgan_gp_loss(
    critic: SequenceCritic,
    fake_seq: torch.Tensor,
    real_seq: torch.Tensor,
    rng: np.random.Generator,
    gp_weight: float = 10.0,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Critic loss E[D(fake)] - E[D(real)] plus the gradient penalty on
    random interpolates. Sequences must pair up one-to-one."""
    if fake_seq.shape != real_seq.shape:
        raise SequenceError(f"sequence shapes differ: {fake_seq.shape} vs {real_seq.shape}")
    d_fake = critic(fake_seq).mean()
    d_real = critic(real_seq).mean()

    u = torch.from_numpy(
        rng.uniform(size=(fake_seq.shape[0], 1, 1, 1)).astype(np.float32)
    )
    interp = (u * fake_seq + (1.0 - u) * real_seq).detach().requires_grad_(True)
    d_interp = critic(interp)
    grads = torch.autograd.grad(
        outputs=d_interp,
        inputs=interp,
        grad_outputs=torch.ones_like(d_interp),
        create_graph=True,
    )[0]
    norms = grads.flatten(1).norm(2, dim=1)
    gp = ((norms - 1.0) ** 2).mean()
    return d_fake - d_real + gp_weight * gp, gp


def box_reg_loss(pred_boxes: torch.Tensor, gt_boxes: torch.Tensor) -> torch.Tensor:
    """Smooth-L1 over normalized box coordinates, summed over rooms."""
    pred = torch.as_tensor(pred_boxes, dtype=torch.float32)
    gt = torch.as_tensor(gt_boxes, dtype=torch.float32)
    if pred.shape != gt.shape:
        raise SequenceError(f"box lists differ in shape: {pred.shape} vs {gt.shape}")
    return F.smooth_l1_loss(pred, gt, reduction="sum")


def real_sequence(layout, order: Sequence[int], k: int) -> tuple[np.ndarray, np.ndarray]:
    """Ground-truth state sequence for rooms taken in ``order``."""
    state = initial_state(layout.boundary)
    states = []
    boxes = []
    for idx in order:
        room = layout.rooms[idx]
        state = blend(state, hard_box_mask(room.box), type_code(room.type_id, k))
        states.append(state)
        boxes.append(np.asarray(room.box, dtype=np.float32) / RESOLUTION)
    return np.stack(states), np.stack(boxes)


@dataclass
class PartitionerConfig:
    max_rooms: int = 8
    n_critic: int = 5
    lr: float = 1e-4
    # regression-only warmup can run hotter than the adversarial phase
    warmup_lr: float | None = 5e-4
    betas: tuple[float, float] = (0.5, 0.9)
    gp_weight: float = 10.0
    box_weight: float = 100.0
    batch_size: int = 4
    iterations: int = 300
    mask_prefit_iters: int = 400
    box_warmup_iters: int = 100


def _rollout(
    gen: Partitioner, layout, order: Sequence[int], with_grad: bool
) -> tuple[list[torch.Tensor], torch.Tensor]:
    """Generator rollout along a room order; returns per-step state tensors
    (soft blended, differentiable when with_grad) and the predicted boxes."""
    k = gen.registry_size
    state = torch.from_numpy(initial_state(layout.boundary))
    exterior = torch.from_numpy((layout.boundary.interior_mask == 0).astype(np.bool_))
    states: list[torch.Tensor] = []
    pred_boxes: list[torch.Tensor] = []
    ctx = torch.enable_grad() if with_grad else torch.no_grad()
    with ctx:
        for idx in order:
            room = layout.rooms[idx]
            planes = regressor_input(state.detach().numpy(), room.center, room.type_id, k)
            raw = gen.box_net(torch.from_numpy(planes).unsqueeze(0))
            box = canonical_norm_box(raw)
            mask = gen.mask_net(box_raster(box.squeeze(0))).squeeze(0)
            code = type_code(room.type_id, k)
            blended = state * (1.0 - mask) + mask * code
            state = torch.where(exterior, torch.full_like(blended, -1.0), blended)
            states.append(state)
            pred_boxes.append(box.squeeze(0))
    return states, torch.stack(pred_boxes)


def _pad_tensor_sequence(states: list[torch.Tensor], max_rooms: int) -> torch.Tensor:
    stack = states + [states[-1]] * (max_rooms - len(states))
    return torch.stack(stack)


def train_partitioner(
    corpus,
    registry: RoomTypeRegistry,
    config: PartitionerConfig | None = None,
    rng: np.random.Generator | None = None,
    progress: Callable[[int, dict], None] | None = None,
    early_stop: Callable[[int, Partitioner], bool] | None = None,
    eval_every: int = 50,
) -> tuple[Partitioner, SequenceCritic, list[dict]]:
    if not corpus:
        raise DataError("cannot train on an empty corpus")
    config = config or PartitionerConfig()
    if any(l.n_rooms > config.max_rooms for l in corpus):
        raise DataError(f"corpus contains layouts with more than {config.max_rooms} rooms")
    rng = rng if rng is not None else np.random.default_rng(0)
    torch.manual_seed(int(rng.integers(2**31)))

    k = registry.size
    gen = Partitioner(box_net=BoxRegressor(k), mask_net=MaskSynth(), registry_size=k)
    critic = SequenceCritic(config.max_rooms)
    opt_g = torch.optim.Adam(
        list(gen.box_net.parameters()) + list(gen.mask_net.parameters()),
        lr=config.lr,
        betas=config.betas,
    )
    opt_d = torch.optim.Adam(critic.parameters(), lr=config.lr, betas=config.betas)

    prefit_mask_synth(gen.mask_net, rng, iters=config.mask_prefit_iters)

    def sample_batch():
        picks = []
        for _ in range(config.batch_size):
            layout = corpus[int(rng.integers(len(corpus)))]
            order = rng.permutation(layout.n_rooms).tolist()
            picks.append((layout, order))
        return picks

    trace: list[dict] = []
    warmup = config.box_warmup_iters
    if config.warmup_lr is not None and warmup > 0:
        for group in opt_g.param_groups:
            group["lr"] = config.warmup_lr
    for it in range(config.iterations):
        record: dict = {"iter": it}
        if it == warmup and config.warmup_lr is not None:
            for group in opt_g.param_groups:
                group["lr"] = config.lr
        if it >= warmup:
            for _ in range(config.n_critic):
                batch = sample_batch()
                fakes, reals = [], []
                for layout, order in batch:
                    states, _ = _rollout(gen, layout, order, with_grad=False)
                    fakes.append(_pad_tensor_sequence(states, config.max_rooms))
                    real_states, _ = real_sequence(layout, order, k)
                    reals.append(
                        torch.from_numpy(pad_sequence(list(real_states), config.max_rooms))
                    )
                d_loss, gp = wgan_gp_loss(
                    critic,
                    torch.stack(fakes),
                    torch.stack(reals),
                    rng,
                    gp_weight=config.gp_weight,
                )
                if not torch.isfinite(d_loss):
                    raise DataError(f"non-finite critic loss at iteration {it}")
                opt_d.zero_grad()
                d_loss.backward()
                opt_d.step()
            record["d_loss"] = d_loss.item()
            record["gp"] = gp.item()

        batch = sample_batch()
        gen_score = torch.zeros(())
        box_term = torch.zeros(())
        fakes = []
        for layout, order in batch:
            states, pred_boxes = _rollout(gen, layout, order, with_grad=True)
            _, gt_boxes = real_sequence(layout, order, k)
            box_term = box_term + box_reg_loss(pred_boxes, torch.from_numpy(gt_boxes))
            fakes.append(_pad_tensor_sequence(states, config.max_rooms))
        if it >= warmup:
            gen_score = critic(torch.stack(fakes)).mean()
        g_loss = -gen_score + config.box_weight * box_term / config.batch_size
        if not torch.isfinite(g_loss):
            raise DataError(f"non-finite generator loss at iteration {it}")
        opt_g.zero_grad()
        g_loss.backward()
        opt_g.step()
        record["g_loss"] = g_loss.item()
        record["box_term"] = box_term.item() / config.batch_size
        trace.append(record)
        if progress is not None:
            progress(it, record)
        if early_stop is not None and it >= warmup and (it + 1) % eval_every == 0:
            gen.box_net.eval()
            gen.mask_net.eval()
            done = early_stop(it, gen)
            gen.box_net.train()
            gen.mask_net.train()
            if done:
                break

    gen.box_net.eval()
    gen.mask_net.eval()
    critic.eval()
    return gen, critic, trace


def prefit_mask_synth(
    mask_net: MaskSynth, rng: np.random.Generator, iters: int = 400, batch: int = 8
) -> list[float]:
    """Supervised warm start: fit the mask net to hard rasterized boxes."""
    opt = torch.optim.Adam(mask_net.parameters(), lr=1e-3)
    losses = []
    mask_net.train()
    for _ in range(iters):
        boxes = []
        targets = []
        for _ in range(batch):
            top, left = rng.uniform(0.0, 0.8, size=2)
            bottom = rng.uniform(top + 0.05, 1.0)
            right = rng.uniform(left + 0.05, 1.0)
            boxes.append([top, left, bottom, right])
            targets.append(hard_box_mask(np.array([top, left, bottom, right]) * RESOLUTION))
        pred = mask_net(box_raster(torch.tensor(boxes, dtype=torch.float32)))
        loss = F.binary_cross_entropy(pred, torch.from_numpy(np.stack(targets)))
        opt.zero_grad()
        loss.backward()
        opt.step()
        losses.append(loss.item())
    mask_net.eval()
    return losses


def save_checkpoint(
    gen: Partitioner,
    critic: SequenceCritic,
    registry: RoomTypeRegistry,
    path,
    max_rooms: int,
) -> None:
    torch.save(
        {
            "kind": "partitioner",
            "k": gen.registry_size,
            "max_rooms": max_rooms,
            "encoding": "typecode-v1",
            "registry_hash": registry.content_hash(),
            "box_net": gen.box_net.state_dict(),
            "mask_net": gen.mask_net.state_dict(),
            "critic": critic.state_dict(),
        },
        path,
    )


def load_checkpoint(path, registry: RoomTypeRegistry) -> tuple[Partitioner, SequenceCritic]:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("kind") != "partitioner":
        raise CheckpointError(f"not a partitioner checkpoint: {path}")
    if payload["k"] != registry.size:
        raise RegistryError(
            f"checkpoint has K={payload['k']} but registry has K={registry.size}"
        )
    gen = Partitioner(
        box_net=BoxRegressor(payload["k"]), mask_net=MaskSynth(), registry_size=payload["k"]
    )
    gen.box_net.load_state_dict(payload["box_net"])
    gen.mask_net.load_state_dict(payload["mask_net"])
    critic = SequenceCritic(payload["max_rooms"])
    critic.load_state_dict(payload["critic"])
    gen.box_net.eval()
    gen.mask_net.eval()
    critic.eval()
    return gen, critic


def generation_trace(
    boxes: Sequence[np.ndarray], states: Sequence[np.ndarray]
) -> list[dict]:
    """Exportable playback trace: box, thresholded-mask RLE, state hash."""
    from hashlib import sha256

    from .io import rle_encode

    out = []
    for box, state in zip(boxes, states):
        mask = hard_box_mask(box).astype(np.uint8)
        digest = sha256(np.ascontiguousarray(state).tobytes()).hexdigest()[:16]
        out.append(
            {
                "box": [float(v) for v in box],
                "mask_rle": rle_encode(mask),
                "state_hash": digest,
            }
        )
    return out
