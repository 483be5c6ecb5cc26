import copy
import hashlib
import os
from pathlib import Path

import numpy as np
import pytest
import torch

from iplan import data
from iplan.evaluation import box_accuracy, center_accuracy
from iplan.locator import CenterLocator, LocatorConfig, train_locator
from iplan.locator import load_checkpoint as load_locator
from iplan.locator import save_checkpoint as save_locator
from iplan.partitioner import (
    BoxRegressor,
    MaskSynth,
    Partitioner,
    PartitionerConfig,
    train_partitioner,
)
from iplan.partitioner import load_checkpoint as load_partitioner
from iplan.partitioner import save_checkpoint as save_partitioner
from iplan.session import ModelBundle
from iplan.typegen import TypeCountVae, TypeVaeConfig, train_type_vae
from iplan.typegen import load_checkpoint as load_typegen
from iplan.typegen import save_checkpoint as save_typegen

CORPUS_SEED = 123
CORPUS_SIZE = 20
TRAIN_SEED = 7

# bump to invalidate cached desk-scale checkpoints
TRAIN_RECIPE = "v2"


@pytest.fixture(scope="session")
def registry():
    return data.SYNTH_REGISTRY


@pytest.fixture(scope="session")
def small_corpus():
    return data.synth_corpus(6, rng=np.random.default_rng(42))


@pytest.fixture(scope="session")
def overfit_corpus():
    return data.synth_corpus(CORPUS_SIZE, rng=np.random.default_rng(CORPUS_SEED))


@pytest.fixture(scope="session")
def untrained_models(registry):
    torch.manual_seed(0)
    return ModelBundle(
        registry=registry,
        type_vae=TypeCountVae(registry.n_bits).eval(),
        locator=CenterLocator(registry.size).eval(),
        partitioner=Partitioner(
            box_net=BoxRegressor(registry.size).eval(),
            mask_net=MaskSynth().eval(),
            registry_size=registry.size,
        ),
    )


def _cache_dir() -> Path | None:
    if os.environ.get("IPLAN_TEST_CACHE", "1").lower() in ("0", "false", "no"):
        return None
    root = Path(os.environ.get("IPLAN_TEST_CACHE_DIR", ".cache/iplan-tests"))
    key = hashlib.sha256(
        f"{TRAIN_RECIPE}|{CORPUS_SEED}|{CORPUS_SIZE}|{TRAIN_SEED}".encode()
    ).hexdigest()[:16]
    path = root / key
    path.mkdir(parents=True, exist_ok=True)
    return path


def _train_all(corpus, registry):
    rng = np.random.default_rng(TRAIN_SEED)
    vae, _ = train_type_vae(corpus, registry, TypeVaeConfig(epochs=500), rng)

    best = {"acc": 0.0, "state": None}

    def locator_done(step, net):
        acc = center_accuracy(net, corpus, registry)
        if acc > best["acc"]:
            best["acc"] = acc
            best["state"] = copy.deepcopy(net.state_dict())
        return acc >= 0.93

    loc, _ = train_locator(
        corpus,
        registry,
        LocatorConfig(steps=3000, batch_size=8, lr_milestones=(0.4, 0.65, 0.85)),
        rng,
        early_stop=locator_done,
        eval_every=150,
    )
    if best["state"] is not None:
        loc.load_state_dict(best["state"])
        loc.eval()

    best_box = {"acc": 0.0, "state": None}

    def partitioner_done(it, gen):
        acc = box_accuracy(gen, corpus)
        if acc > best_box["acc"]:
            best_box["acc"] = acc
            best_box["state"] = copy.deepcopy(gen.box_net.state_dict())
        return acc >= 0.95

    gen, critic, _ = train_partitioner(
        corpus,
        registry,
        PartitionerConfig(iterations=650, box_warmup_iters=500, mask_prefit_iters=200),
        rng,
        early_stop=partitioner_done,
        eval_every=25,
    )
    if best_box["state"] is not None:
        gen.box_net.load_state_dict(best_box["state"])
        gen.box_net.eval()
    return vae, loc, gen, critic


@pytest.fixture(scope="session")
def trained_models(overfit_corpus, registry):
    """Desk-scale models overfit to the 20-layout corpus (disk-cached)."""
    cache = _cache_dir()
    if cache is not None:
        paths = {name: cache / f"{name}.pt" for name in ("bcvae", "locator", "partitioner")}
        if all(p.exists() for p in paths.values()):
            try:
                vae = load_typegen(paths["bcvae"], registry)
                loc = load_locator(paths["locator"], registry)
                gen, _critic = load_partitioner(paths["partitioner"], registry)
                return ModelBundle(
                    registry=registry, type_vae=vae, locator=loc, partitioner=gen
                )
            except Exception:
                pass  # stale cache: retrain below

    vae, loc, gen, critic = _train_all(overfit_corpus, registry)
    if cache is not None:
        save_typegen(vae, registry, cache / "bcvae.pt")
        save_locator(loc, registry, cache / "locator.pt")
        save_partitioner(gen, critic, registry, cache / "partitioner.pt", max_rooms=8)
    return ModelBundle(registry=registry, type_vae=vae, locator=loc, partitioner=gen)
