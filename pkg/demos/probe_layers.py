"""How much digit identity each hidden layer keeps.

Trains one machine per init kind on an MNIST subset, then fits a softmax
probe on the mean-field activities of every hidden layer and every
cumulative concatenation, printing the test-accuracy ladder side by side.
Smaller budget than the full experiment but the same shape of result: the
staged machine's upper layers stay informative, the random-init machine's
collapse.

    python3 demos/probe_layers.py

A few minutes on one core.
"""

from pathlib import Path

import numpy as np

from hmpyramid import (
    Architecture,
    InitSpec,
    StageConfig,
    TrainConfig,
    init_machine,
    load_idx,
    probe_feature_sets,
    probe_train,
    pyramid_pretrain,
    take,
    train,
)

ROOT = Path(__file__).resolve().parents[1]
ARCH = Architecture([784, 625, 484, 289, 196, 100, 16])
STAGE_EPOCHS = 1
FINETUNE_EPOCHS = 1
LEARNING_RATE = 0.01
TRAIN_SUBSET = 4000
TEST_SUBSET = 1000
SEED = 0


def main():
    tr = take(
        load_idx(
            ROOT / "data/mnist/train-images-idx3-ubyte.gz",
            ROOT / "data/mnist/train-labels-idx1-ubyte.gz",
            "mnist",
        ),
        TRAIN_SUBSET,
    )
    te = take(
        load_idx(
            ROOT / "data/mnist/t10k-images-idx3-ubyte.gz",
            ROOT / "data/mnist/t10k-labels-idx1-ubyte.gz",
            "mnist",
        ),
        TEST_SUBSET,
    )
    xtr = (tr.vectors() > 0.5).astype(np.float64)
    xte = (te.vectors() > 0.5).astype(np.float64)
    matched = ARCH.n_hidden * STAGE_EPOCHS + FINETUNE_EPOCHS

    accuracies = {}
    for kind in ("pyramid", "random"):
        if kind == "pyramid":
            cfg = StageConfig(
                stage_epochs=STAGE_EPOCHS,
                stage_learning_rate=LEARNING_RATE,
                finetune_epochs=FINETUNE_EPOCHS,
                init="random",
            )
            machine = pyramid_pretrain(ARCH, tr.images, cfg, SEED)
        else:
            machine = init_machine(ARCH, InitSpec("random"), SEED)
            train(machine, xtr, TrainConfig(matched, LEARNING_RATE, SEED))
        feats_tr = probe_feature_sets(machine, xtr)
        feats_te = probe_feature_sets(machine, xte)
        accuracies[kind] = {
            name: probe_train(feats_tr[name], tr.labels).accuracy(
                feats_te[name], te.labels
            )
            for name in feats_tr
        }
        print(f"probed the {kind} machine")

    names = list(next(iter(accuracies.values())))
    print(f"\n{'features':>12s}  {'staged':>7s}  {'random':>7s}")
    for name in names:
        print(f"{name:>12s}  {accuracies['pyramid'][name]:7.3f}"
              f"  {accuracies['random'][name]:7.3f}")


if __name__ == "__main__":
    main()
