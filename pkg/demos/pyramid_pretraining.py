"""Staged pretraining against a matched random baseline, end to end.

Trains the same architecture on an MNIST subset two ways: grown stage by
stage on coarse-to-fine renderings, and from random weights for the same
total number of epochs.  Writes a grid of generated digits for each and
prints how far the generated samples sit from the training data.

    python3 demos/pyramid_pretraining.py

A minute or two on one core.
"""

import time
from pathlib import Path

import numpy as np

from hmpyramid import (
    Architecture,
    InitSpec,
    StageConfig,
    TrainConfig,
    count_free_parameters,
    init_machine,
    load_idx,
    make_rng,
    mean_min_distance,
    pyramid_pretrain,
    take,
    train,
    write_pgm,
)
from hmpyramid.experiments import GEN_STREAM_ID

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "results" / "pretraining_demo"
ARCH = Architecture([784, 196, 64])
STAGE_EPOCHS = 2
FINETUNE_EPOCHS = 2
LEARNING_RATE = 0.01
SUBSET = 2000
SEED = 0


def sample_grid(machine, path, count=16):
    pool = machine.generate(count, make_rng(SEED, GEN_STREAM_ID))
    side = int(np.sqrt(machine.arch.sizes[0]))
    rows = pool.reshape(-1, 4, side, side)
    grid = np.concatenate([np.concatenate(r, axis=1) for r in rows], axis=0)
    write_pgm(path, grid)
    return pool


def main():
    data = take(
        load_idx(
            ROOT / "data/mnist/train-images-idx3-ubyte.gz",
            ROOT / "data/mnist/train-labels-idx1-ubyte.gz",
            "mnist",
        ),
        SUBSET,
    )
    x = (data.vectors() > 0.5).astype(np.float64)
    matched = ARCH.n_hidden * STAGE_EPOCHS + FINETUNE_EPOCHS
    print(f"architecture {list(ARCH.sizes)}, "
          f"{count_free_parameters(ARCH)} free parameters, "
          f"{SUBSET} training digits")
    print(f"budget: {ARCH.n_hidden} stages x {STAGE_EPOCHS} epochs "
          f"+ {FINETUNE_EPOCHS} finetune = {matched} epochs either way\n")

    OUT.mkdir(parents=True, exist_ok=True)
    for kind in ("pyramid", "random"):
        t0 = time.perf_counter()
        if kind == "pyramid":
            cfg = StageConfig(
                stage_epochs=STAGE_EPOCHS,
                stage_learning_rate=LEARNING_RATE,
                finetune_epochs=FINETUNE_EPOCHS,
                init="random",
            )
            machine = pyramid_pretrain(ARCH, data.images, cfg, SEED)
        else:
            machine = init_machine(ARCH, InitSpec("random"), SEED)
            train(machine, x, TrainConfig(matched, LEARNING_RATE, SEED))
        elapsed = time.perf_counter() - t0

        path = OUT / f"{kind}_samples.pgm"
        pool = sample_grid(machine, path)
        print(f"{kind:8s} trained in {elapsed:5.1f}s, "
              f"mean distance of samples to data {mean_min_distance(pool, x):6.3f}, "
              f"grid -> {path.relative_to(ROOT)}")

    print("\nthe staged machine's samples should look like digits already;")
    print("the random-init machine needs far more epochs to get there.")


if __name__ == "__main__":
    main()
