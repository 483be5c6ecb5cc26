"""Serve the session API for UI development and e2e tests.

Without --config it builds deterministic untrained models, which is enough
to exercise every endpoint and the full session protocol.
"""

import argparse

import torch
import uvicorn

from iplan.data import SYNTH_REGISTRY
from iplan.locator import CenterLocator
from iplan.partitioner import BoxRegressor, MaskSynth, Partitioner
from iplan.service import create_app, mount_ui
from iplan.session import ModelBundle
from iplan.typegen import TypeCountVae


def build_models() -> ModelBundle:
    torch.manual_seed(0)
    registry = SYNTH_REGISTRY
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


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--ui", default=None, help="static directory with the designer build")
    parser.add_argument("--config", default=None, help="serve trained models from this config")
    parser.add_argument("--session-dir", default=None)
    args = parser.parse_args()

    if args.config:
        from iplan.config import load_config, load_models

        cfg = load_config(args.config)
        models = load_models(cfg)
        session_dir = args.session_dir or cfg.session_dir
    else:
        models = build_models()
        session_dir = args.session_dir

    app = create_app(models, session_dir=session_dir)
    if args.ui:
        mount_ui(app, args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
