"""How generated mass spreads over a tiny training set.

Trains a deep machine (staged init) and a wider shallow machine (random
init) on the same 16 digits, generates 500 images from each, and prints the
coverage metrics: the fraction of samples nearest each training pattern, the
entropy of that distribution, how many patterns attract nothing, and the
mean distance from sample to nearest pattern.

    python3 demos/replication_metrics.py

Under a minute on one core.
"""

from pathlib import Path

import numpy as np

from hmpyramid import (
    Architecture,
    InitSpec,
    StageConfig,
    TrainConfig,
    density_vector,
    init_machine,
    make_rng,
    mean_min_distance,
    normalized_entropy,
    pyramid_pretrain,
    take,
    train,
    load_idx,
    unrepresented_count,
)
from hmpyramid.experiments import GEN_STREAM_ID

ROOT = Path(__file__).resolve().parents[1]
DEEP = Architecture([784, 484, 225, 64])
SHALLOW = Architecture([784, 709])
N = 16
GENERATE = 500
STAGE_EPOCHS = 100
FINETUNE_EPOCHS = 100
LEARNING_RATE = 0.05
SEED = 0


def main():
    data = take(
        load_idx(
            ROOT / "data/mnist/train-images-idx3-ubyte.gz",
            ROOT / "data/mnist/train-labels-idx1-ubyte.gz",
            "mnist",
        ),
        N,
    )
    x = (data.vectors() > 0.5).astype(np.float64)
    matched = DEEP.n_hidden * STAGE_EPOCHS + FINETUNE_EPOCHS

    machines = {}
    cfg = StageConfig(
        stage_epochs=STAGE_EPOCHS,
        stage_learning_rate=LEARNING_RATE,
        finetune_epochs=FINETUNE_EPOCHS,
        init="random",
    )
    machines["deep, staged init"] = pyramid_pretrain(DEEP, data.images, cfg, SEED)
    shallow = init_machine(SHALLOW, InitSpec("random"), SEED)
    train(shallow, x, TrainConfig(matched, LEARNING_RATE, SEED))
    machines["shallow, random init"] = shallow

    print(f"{N} training digits, {GENERATE} generated images per machine\n")
    for label, machine in machines.items():
        pool = machine.generate(GENERATE, make_rng(SEED, GEN_STREAM_ID))
        fractions = density_vector(pool, x)
        print(f"{label} ({list(machine.arch.sizes)}):")
        print("  mass per training pattern:",
              " ".join(f"{f:.2f}" for f in fractions))
        print(f"  normalized entropy:  {normalized_entropy(fractions):.3f}"
              "   (1 = perfectly even)")
        print(f"  unrepresented:       {unrepresented_count(fractions)} of {N}")
        print(f"  mean min distance:   {mean_min_distance(pool, x):.3f}\n")

    print("the deep staged machine should cover all 16 patterns almost evenly;")
    print("the shallow machine tends to sit further away and cover them less evenly.")


if __name__ == "__main__":
    main()
