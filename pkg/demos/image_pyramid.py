"""The coarse-to-fine renderings behind staged pretraining.

Loads a few MNIST digits, prints the side lengths each hidden layer of the
standard 7-layer shape corresponds to, and writes every rendering of the
first digit as a PGM image so the resolution ladder can be inspected.

    python3 demos/image_pyramid.py
"""

from pathlib import Path

from hmpyramid import Architecture, build_pyramid, load_idx, stage_visible_sides, take, write_pgm

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "results" / "pyramid_demo"
ARCH = Architecture([784, 625, 484, 289, 196, 100, 16])


def main():
    data = load_idx(
        ROOT / "data/mnist/train-images-idx3-ubyte.gz",
        ROOT / "data/mnist/train-labels-idx1-ubyte.gz",
        "mnist",
    )
    digits = take(data, 4)

    stage_sides = stage_visible_sides(ARCH)
    print(f"architecture {list(ARCH.sizes)}")
    print(f"stage visible sides, coarse to fine: {stage_sides}")

    decreasing = list(reversed(stage_sides))
    pyramid = build_pyramid(digits.images[0], decreasing)
    OUT.mkdir(parents=True, exist_ok=True)
    for side, level in zip(decreasing, pyramid):
        path = OUT / f"digit0_{side}x{side}.pgm"
        write_pgm(path, level)
        print(f"  {side:2d}x{side:<2d} rendering of digit "
              f"{digits.labels[0]} -> {path.relative_to(ROOT)}")
    print("\neach stage of pretraining clamps one of these renderings to the")
    print("layer that is the machine's visible layer at that stage.")


if __name__ == "__main__":
    main()
