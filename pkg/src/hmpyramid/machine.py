"""Layered stochastic binary networks with separate recognition and generative
weights, trained by alternating wake and sleep phases of local delta-rule
updates.

Layer 0 is the visible layer; layers 1..L are hidden.  Layer states are plain
lists of L+1 float64 0/1 vectors ordered bottom-up.  Weight blocks carry their
bias in the last column, so a layer state is always consumed augmented with a
constant 1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from math import isqrt

import numpy as np
from scipy.linalg.blas import dger

from .errors import ArchitectureError, DimensionError, FormatError
from .numerics import RngStream, bernoulli, make_rng, sigmoid

__all__ = [
    "Architecture",
    "HelmholtzMachine",
    "InitSpec",
    "TrainConfig",
    "init_machine",
    "train",
    "count_free_parameters",
    "INIT_STREAM_ID",
]

# Stream id reserved for weight initialization, far away from the small
# per-class/per-stage training stream ids so one seed never replays draws.
INIT_STREAM_ID = 2**32

MAGIC = b"HMW1"


@dataclass(frozen=True)
class Architecture:
    """Layer sizes, visible first: ``sizes[0]`` units at the bottom.

    At least one hidden layer is required and every size must be positive.
    Deliberately permissive beyond that; the staged multi-resolution
    initializer imposes its extra structure via ``is_pyramid_compatible``.
    """

    sizes: tuple[int, ...]

    def __init__(self, sizes):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2:
            raise ArchitectureError("need a visible layer and at least one hidden layer")
        if any(s <= 0 for s in sizes):
            raise ArchitectureError(f"layer sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def n_hidden(self) -> int:
        """Number of hidden layers L."""
        return len(self.sizes) - 1

    @property
    def visible(self) -> int:
        return self.sizes[0]

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return self.sizes[1:]

    def is_pyramid_compatible(self) -> bool:
        """True when staged multi-resolution pretraining applies.

        Every layer that acts as a visible layer during some stage (all but
        the topmost) must be a perfect square, and those sides must strictly
        decrease bottom-up so each stage sees a coarser rendering.
        """
        sides = [_exact_side(s) for s in self.sizes[:-1]]
        if any(side is None for side in sides):
            return False
        return all(a > b for a, b in zip(sides, sides[1:]))


def _exact_side(units: int) -> int | None:
    side = isqrt(units)
    return side if side * side == units else None


def count_free_parameters(arch: Architecture) -> int:
    """Generative parameter count excluding bias weights.

    The top layer contributes its bias vector (its only generative input);
    every other generative block contributes its weight matrix without the
    bias column.
    """
    sizes = arch.sizes
    total = sizes[-1]
    for below, above in zip(sizes[:-1], sizes[1:]):
        total += below * above
    return total


@dataclass(frozen=True)
class TrainConfig:
    """Wake-sleep schedule: full passes over the data at a fixed step size."""

    epochs: int
    learning_rate: float = 0.01
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class InitSpec:
    """How to set the initial weights.

    ``zero`` starts every block at 0, ``random`` draws N(0, sigma^2) entries,
    ``pyramid`` runs staged multi-resolution pretraining and needs the raw
    grayscale images plus a stage configuration.
    """

    kind: str
    random_sigma: float = 0.05
    pyramid_images: np.ndarray | None = None
    pyramid_config: "object | None" = None  # pyramid.StageConfig

    def __post_init__(self):
        if self.kind not in ("zero", "random", "pyramid"):
            raise ValueError(f"unknown init kind {self.kind!r}")
        if self.kind == "random" and not self.random_sigma > 0:
            raise ValueError("random init needs sigma > 0")


def _aug(v: np.ndarray) -> np.ndarray:
    out = np.empty(v.shape[0] + 1)
    out[:-1] = v
    out[-1] = 1.0
    return out


def _add_outer(a: np.ndarray, alpha: float, u: np.ndarray, v: np.ndarray) -> None:
    # a += alpha * outer(u, v) without a temporary; a is C-contiguous so its
    # transpose is the Fortran-order view BLAS updates in place
    dger(alpha, v, u, a=a.T, overwrite_a=1)


class HelmholtzMachine:
    """Recognition and generative weights plus the top-layer generative bias.

    ``R[i]`` maps layer i up to layer i+1 and has shape
    (sizes[i+1], sizes[i] + 1); ``G[i]`` maps layer i+1 down to layer i and
    has shape (sizes[i], sizes[i+1] + 1); ``top_bias`` has length sizes[-1].
    Each block has a frozen flag; frozen blocks are skipped by updates but
    still used for sampling.  Weight arrays are owned, not copied, so stacked
    sub-machines can share storage with their parent.
    """

    def __init__(self, arch: Architecture, R, G, top_bias,
                 frozen_R=None, frozen_G=None, frozen_top: bool = False):
        L = arch.n_hidden
        if len(R) != L or len(G) != L:
            raise DimensionError(f"need {L} R and G blocks, got {len(R)} and {len(G)}")
        for i in range(L):
            want_r = (arch.sizes[i + 1], arch.sizes[i] + 1)
            want_g = (arch.sizes[i], arch.sizes[i + 1] + 1)
            if R[i].shape != want_r:
                raise DimensionError(f"R[{i}] must have shape {want_r}, got {R[i].shape}")
            if G[i].shape != want_g:
                raise DimensionError(f"G[{i}] must have shape {want_g}, got {G[i].shape}")
        if top_bias.shape != (arch.sizes[-1],):
            raise DimensionError(
                f"top_bias must have shape ({arch.sizes[-1]},), got {top_bias.shape}"
            )
        self.arch = arch
        self.R = list(R)
        self.G = list(G)
        self.top_bias = top_bias
        self.frozen_R = list(frozen_R) if frozen_R is not None else [False] * L
        self.frozen_G = list(frozen_G) if frozen_G is not None else [False] * L
        self.frozen_top = bool(frozen_top)

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, arch: Architecture) -> "HelmholtzMachine":
        """All weights and biases start at zero."""
        R = [np.zeros((arch.sizes[i + 1], arch.sizes[i] + 1)) for i in range(arch.n_hidden)]
        G = [np.zeros((arch.sizes[i], arch.sizes[i + 1] + 1)) for i in range(arch.n_hidden)]
        return cls(arch, R, G, np.zeros(arch.sizes[-1]))

    @classmethod
    def random(cls, arch: Architecture, sigma: float, rng: RngStream) -> "HelmholtzMachine":
        """Independent N(0, sigma^2) entries, drawn R blocks first (bottom-up),
        then G blocks (bottom-up), then the top bias."""
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        R = [rng.normal(0.0, sigma, (arch.sizes[i + 1], arch.sizes[i] + 1))
             for i in range(arch.n_hidden)]
        G = [rng.normal(0.0, sigma, (arch.sizes[i], arch.sizes[i + 1] + 1))
             for i in range(arch.n_hidden)]
        return cls(arch, R, G, rng.normal(0.0, sigma, arch.sizes[-1]))

    @property
    def n_hidden(self) -> int:
        return self.arch.n_hidden

    def copy(self) -> "HelmholtzMachine":
        return HelmholtzMachine(
            self.arch,
            [w.copy() for w in self.R],
            [w.copy() for w in self.G],
            self.top_bias.copy(),
            list(self.frozen_R),
            list(self.frozen_G),
            self.frozen_top,
        )

    def sub_stack(self, level: int) -> "HelmholtzMachine":
        """Machine over layers ``level..L`` sharing this machine's arrays.

        Training the sub-machine mutates the parent's weights; the sub-machine
        gets fresh frozen flags (all False) so stage schedules can set them
        without touching the parent's.
        """
        if not 0 <= level < self.n_hidden:
            raise ValueError(f"level must be in [0, {self.n_hidden - 1}], got {level}")
        return HelmholtzMachine(
            Architecture(self.arch.sizes[level:]),
            self.R[level:],
            self.G[level:],
            self.top_bias,
        )

    # -- sampling ----------------------------------------------------------

    def recognition_sample(self, visible, rng: RngStream) -> list[np.ndarray]:
        """Stochastic bottom-up pass: clamp the visible vector, sample each
        hidden layer from its recognition sigmoid.  Returns [h0, ..., hL]."""
        h = np.asarray(visible, dtype=np.float64)
        if h.shape != (self.arch.sizes[0],):
            raise DimensionError(
                f"visible vector must have length {self.arch.sizes[0]}, got {h.shape}"
            )
        states = [h]
        for Rk in self.R:
            h = bernoulli(sigmoid(Rk @ _aug(h)), rng)
            states.append(h)
        return states

    def recognition_probs(self, visible) -> list[np.ndarray]:
        """Deterministic mean-field bottom-up pass: each layer's sigmoid is fed
        the previous layer's probabilities.  Returns [p1, ..., pL]."""
        x = np.asarray(visible, dtype=np.float64)
        if x.shape != (self.arch.sizes[0],):
            raise DimensionError(
                f"visible vector must have length {self.arch.sizes[0]}, got {x.shape}"
            )
        probs = []
        for Rk in self.R:
            x = sigmoid(Rk @ _aug(x))
            probs.append(x)
        return probs

    def generative_dream(self, rng: RngStream) -> list[np.ndarray]:
        """Top-down fantasy: sample the top layer from its bias sigmoid, then
        each layer below from its generative sigmoid.  Returns [h0, ..., hL]."""
        states: list = [None] * (self.n_hidden + 1)
        states[-1] = bernoulli(sigmoid(self.top_bias), rng)
        for i in range(self.n_hidden - 1, -1, -1):
            states[i] = bernoulli(sigmoid(self.G[i] @ _aug(states[i + 1])), rng)
        return states

    def generate(self, count: int, rng: RngStream, binary: bool = False) -> np.ndarray:
        """Run ``count`` independent dreams and collect the visible layer.

        By default each row is the visible probability vector under the
        dream's first hidden state; with ``binary=True`` it is the sampled
        visible state itself.  Both modes run identical dreams, so the same
        stream yields samples of exactly the rows the other mode returns.
        """
        if count < 1:
            raise ValueError("count must be >= 1")
        out = np.empty((count, self.arch.sizes[0]))
        for i in range(count):
            states = self.generative_dream(rng)
            if binary:
                out[i] = states[0]
            else:
                out[i] = sigmoid(self.G[0] @ _aug(states[1]))
        return out

    # -- learning ----------------------------------------------------------

    def wake_step(self, visible, learning_rate: float, rng: RngStream) -> None:
        """One recognition-driven sample followed by generative deltas.

        Every generative block moves toward predicting the sampled layer below
        from the sampled layer above, using its prediction from before the
        update; the top bias moves toward the sampled top state.
        """
        states = self.recognition_sample(visible, rng)
        for i in range(self.n_hidden):
            if self.frozen_G[i]:
                continue
            src = _aug(states[i + 1])
            err = states[i] - sigmoid(self.G[i] @ src)
            _add_outer(self.G[i], learning_rate, err, src)
        if not self.frozen_top:
            self.top_bias += learning_rate * (states[-1] - sigmoid(self.top_bias))

    def sleep_step(self, learning_rate: float, rng: RngStream) -> None:
        """One generative dream followed by recognition deltas.

        Every recognition block moves toward predicting the dreamed layer
        above from the dreamed layer below.
        """
        states = self.generative_dream(rng)
        for i in range(self.n_hidden):
            if self.frozen_R[i]:
                continue
            src = _aug(states[i])
            err = states[i + 1] - sigmoid(self.R[i] @ src)
            _add_outer(self.R[i], learning_rate, err, src)

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        """Write the weights in the package's byte-exact binary layout.

        Layout: magic ``HMW1``; uint32 little-endian layer count; that many
        uint64 little-endian layer sizes; then float64 little-endian row-major
        blocks in order R1..RL, G1..GL, top_bias.  Frozen flags are runtime
        state and are not stored.
        """
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", len(self.arch.sizes)))
            f.write(np.asarray(self.arch.sizes, dtype="<u8").tobytes())
            for w in self.R:
                f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            for w in self.G:
                f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.asarray(self.top_bias, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "HelmholtzMachine":
        """Read a machine written by :meth:`save`.  All blocks unfrozen."""
        with open(path, "rb") as f:
            raw = f.read()
        if raw[:4] != MAGIC:
            raise FormatError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
        if len(raw) < 8:
            raise FormatError("truncated header")
        (n_layers,) = struct.unpack("<I", raw[4:8])
        if n_layers < 2:
            raise FormatError(f"need at least 2 layers, got {n_layers}")
        off = 8
        if len(raw) < off + 8 * n_layers:
            raise FormatError("truncated layer-size table")
        sizes = np.frombuffer(raw, dtype="<u8", count=n_layers, offset=off)
        if np.any(sizes == 0):
            raise FormatError("layer sizes must be positive")
        arch = Architecture(sizes.tolist())
        off += 8 * n_layers

        def block(shape):
            nonlocal off
            n = shape[0] * shape[1] if len(shape) == 2 else shape[0]
            end = off + 8 * n
            if end > len(raw):
                raise FormatError("truncated weight data")
            arr = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(shape)
            off = end
            return np.ascontiguousarray(arr)

        L = arch.n_hidden
        R = [block((arch.sizes[i + 1], arch.sizes[i] + 1)) for i in range(L)]
        G = [block((arch.sizes[i], arch.sizes[i + 1] + 1)) for i in range(L)]
        top = block((arch.sizes[-1],))
        if off != len(raw):
            raise FormatError(f"{len(raw) - off} unexpected trailing bytes")
        return cls(arch, R, G, top)


def init_machine(arch: Architecture, init: InitSpec, seed: int) -> HelmholtzMachine:
    """Build a machine according to ``init``.

    Random draws come from stream ``INIT_STREAM_ID`` under ``seed``;
    training streams use small ids, so initialization never replays
    training randomness.
    """
    if init.kind == "zero":
        return HelmholtzMachine.zeros(arch)
    if init.kind == "random":
        return HelmholtzMachine.random(arch, init.random_sigma, make_rng(seed, INIT_STREAM_ID))
    from .pyramid import pyramid_pretrain  # deferred: pyramid trains via this module

    if init.pyramid_images is None or init.pyramid_config is None:
        raise ValueError("pyramid init needs pyramid_images and pyramid_config")
    return pyramid_pretrain(arch, init.pyramid_images, init.pyramid_config, seed)


def train(machine: HelmholtzMachine, data, config: TrainConfig,
          stream_id: int = 0) -> HelmholtzMachine:
    """Wake-sleep passes over ``data`` (one wake + one sleep step per pattern).

    ``data`` is an (n, visible) 0/1 float array; each epoch visits every
    pattern once, in a freshly drawn order when ``shuffle`` is set.  All
    randomness (order and samples) comes from the single stream
    ``(config.seed, stream_id)``.  Mutates and returns ``machine``.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != machine.arch.sizes[0]:
        raise DimensionError(
            f"data must have shape (n, {machine.arch.sizes[0]}), got {data.shape}"
        )
    if data.shape[0] == 0:
        raise ValueError("training data is empty")
    if not np.isin(data, (0.0, 1.0)).all():
        raise ValueError("training data must be binary (0/1)")
    if config.epochs == 0:
        return machine
    rng = make_rng(config.seed, stream_id)
    n = data.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        for idx in order:
            machine.wake_step(data[idx], config.learning_rate, rng)
            machine.sleep_step(config.learning_rate, rng)
    return machine
