"""Small fully-connected networks in numpy, plus reservoir memory.

Networks are float64 throughout so that gradient checks are meaningful and
checkpoints reload bit-for-bit.
"""

from __future__ import annotations

import dataclasses
import json
import os
from typing import Literal, Sequence

import numpy as np

CHECKPOINT_FORMAT = "radarjam-mlp"
CHECKPOINT_VERSION = 1

Head = Literal["softmax", "identity"]
Loss = Literal["mse", "cross_entropy"]


class NonFiniteLossError(FloatingPointError):
    pass


@dataclasses.dataclass(frozen=True)
class MlpSpec:
    widths: tuple[int, ...]
    head: Head = "identity"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ValueError("widths: need at least an input and an output width")
        if min(self.widths) < 1:
            raise ValueError("widths: every layer needs at least one unit")
        if self.head not in ("softmax", "identity"):
            raise ValueError(f"head: expected 'softmax' or 'identity', got {self.head!r}")

    @property
    def input_width(self) -> int:
        return self.widths[0]

    @property
    def output_width(self) -> int:
        return self.widths[-1]

    def to_dict(self) -> dict:
        return {"widths": list(self.widths), "head": self.head, "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "MlpSpec":
        return cls(tuple(data["widths"]), data.get("head", "identity"), int(data.get("seed", 0)))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class MLP:
    """ReLU hidden layers with a softmax or identity output."""

    def __init__(self, spec: MlpSpec, weights: Sequence[np.ndarray] | None = None, biases=None):
        self.spec = spec
        if weights is None:
            rng = np.random.default_rng(spec.seed)
            weights, biases = [], []
            for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
                bound = 1.0 / np.sqrt(fan_in)
                weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
                biases.append(rng.uniform(-bound, bound, size=fan_out))
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (spec.widths[i], spec.widths[i + 1])
            if w.shape != expect or b.shape != (expect[1],):
                raise ValueError(f"layer {i}: parameter shapes {w.shape}/{b.shape} do not match {expect}")

    @property
    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "MLP":
        return MLP(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def _check(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.spec.input_width:
            raise ValueError(f"input width {x.shape[1]} does not match network input {self.spec.input_width}")
        return x, single

    def _activations(self, x: np.ndarray) -> list[np.ndarray]:
        acts = [x]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w + b
            acts.append(z if i == last else np.maximum(z, 0.0))
        return acts

    def logits(self, x) -> np.ndarray:
        x, single = self._check(x)
        out = self._activations(x)[-1]
        return out[0] if single else out

    def forward(self, x) -> np.ndarray:
        x, single = self._check(x)
        out = self._activations(x)[-1]
        if self.spec.head == "softmax":
            out = softmax(out)
        return out[0] if single else out

    __call__ = forward

    def loss_and_grads(self, x, y, loss: Loss, weights=None, mask=None) -> tuple[float, list[np.ndarray]]:
        """Weighted batch loss and its gradient with respect to ``params``.

        Sample weights are normalized to sum to one.  MSE averages the squared
        error over output units, or over the units selected by the boolean
        ``mask`` when one is given; cross-entropy expects a softmax head and
        target distributions.
        """
        x, _ = self._check(x)
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        n = len(x)
        if n == 0:
            raise ValueError("empty batch")
        if y.shape != (n, self.spec.output_width):
            raise ValueError(f"target shape {y.shape} does not match ({n}, {self.spec.output_width})")
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
        w = w / w.sum()

        acts = self._activations(x)
        out = acts[-1]
        if loss == "mse":
            if self.spec.head != "identity":
                raise ValueError("mse loss expects an identity head")
            err = out - y
            if mask is None:
                per_unit = np.full((n, 1), 1.0 / out.shape[1])
            else:
                mask = np.asarray(mask, dtype=np.float64)
                err = err * mask
                per_unit = 1.0 / np.maximum(mask.sum(axis=1, keepdims=True), 1.0)
            value = float(w @ ((err**2) * per_unit).sum(axis=1))
            delta = 2.0 * err * per_unit * w[:, None]
        elif loss == "cross_entropy":
            if self.spec.head != "softmax":
                raise ValueError("cross-entropy loss expects a softmax head")
            z = out - out.max(axis=1, keepdims=True)
            logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
            value = float(-(w @ (y * logp).sum(axis=1)))
            delta = (np.exp(logp) * y.sum(axis=1, keepdims=True) - y) * w[:, None]
        else:
            raise ValueError(f"unknown loss {loss!r}")

        grads: list[np.ndarray] = []
        for i in range(len(self.weights) - 1, -1, -1):
            grads.append(delta.sum(axis=0))
            grads.append(acts[i].T @ delta)
            if i:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0)
        grads.reverse()
        return value, grads

    # -- serialization

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "spec": self.spec.to_dict(),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MLP":
        if data.get("format") != CHECKPOINT_FORMAT or data.get("version") != CHECKPOINT_VERSION:
            raise ValueError("not a version-1 network checkpoint")
        return cls(MlpSpec.from_dict(data["spec"]), data["weights"], data["biases"])


def save_checkpoint(net: MLP, path: str | os.PathLike) -> None:
    # json writes floats with repr, which round-trips exactly
    with open(path, "w", encoding="ascii") as fh:
        json.dump(net.to_dict(), fh)


def load_checkpoint(path: str | os.PathLike) -> MLP:
    with open(path, encoding="ascii") as fh:
        return MLP.from_dict(json.load(fh))


# -- optimizers --------------------------------------------------------------


class SGD:
    def __init__(self, lr: float):
        self.lr = float(lr)

    def apply(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.lr == 0.0:
            return
        for p, g in zip(params, grads):
            p -= self.lr * g


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = float(lr), beta1, beta2, eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def apply(self, params, grads) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            if self.lr:
                p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(name: str, lr: float):
    if name == "sgd":
        return SGD(lr)
    if name == "adam":
        return Adam(lr)
    raise ValueError(f"optimizer: expected 'sgd' or 'adam', got {name!r}")


def train_step(
    net: MLP, x, y, loss: Loss = "mse", lr: float = 1e-2, weights=None, optimizer=None, mask=None
) -> float:
    """One gradient step in place; returns the pre-step loss."""
    value, grads = net.loss_and_grads(x, y, loss, weights, mask)
    if not np.isfinite(value) or not all(np.isfinite(g).all() for g in grads):
        raise NonFiniteLossError(
            f"non-finite {loss} loss ({value!r}) on a batch of {len(np.atleast_2d(x))}; "
            f"largest |param| = {max(float(np.abs(p).max()) for p in net.params):.3g}"
        )
    (optimizer or SGD(lr)).apply(net.params, grads)
    return value


# -- reservoir memory --------------------------------------------------------


class ReservoirBuffer:
    """Uniform fixed-size sample of a stream (Algorithm R).

    A sample is a tuple of arrays ("fields"); storage is allocated on the
    first insertion from the field shapes and dtypes.
    """

    def __init__(self, capacity: int, seed: int | np.random.Generator = 0):
        if capacity < 0:
            raise ValueError("capacity must be nonnegative")
        self.capacity = int(capacity)
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.count_seen = 0
        self.fields: list[np.ndarray] | None = None

    def __len__(self) -> int:
        return min(self.count_seen, self.capacity)

    def _allocate(self, columns: Sequence[np.ndarray]) -> None:
        self.fields = [np.empty((self.capacity,) + c.shape[1:], dtype=c.dtype) for c in columns]

    def add(self, sample) -> None:
        if not isinstance(sample, tuple):
            sample = (sample,)
        self.add_batch(*(np.asarray(f)[None] for f in sample))

    def add_batch(self, *columns) -> None:
        columns = [np.asarray(c) for c in columns]
        n = len(columns[0])
        if any(len(c) != n for c in columns):
            raise ValueError("all fields of a batch need the same length")
        if n == 0:
            return
        if self.capacity == 0:
            self.count_seen += n
            return
        if self.fields is None:
            self._allocate(columns)
        if len(columns) != len(self.fields):
            raise ValueError(f"expected {len(self.fields)} fields, got {len(columns)}")

        seen = self.count_seen + np.arange(n)
        slots = seen.copy()
        late = seen >= self.capacity
        if late.any():
            slots[late] = self.rng.integers(0, seen[late] + 1)
        keep = slots < self.capacity
        src = np.flatnonzero(keep)
        dst = slots[keep]
        # later insertions win when two land in the same slot
        _, last = np.unique(dst[::-1], return_index=True)
        pick = len(dst) - 1 - last
        for field, col in zip(self.fields, columns):
            field[dst[pick]] = col[src[pick]]
        self.count_seen += n

    def contents(self) -> list[np.ndarray]:
        if self.fields is None:
            return []
        return [f[: len(self)] for f in self.fields]


def sample_batch(buffer: ReservoirBuffer, n: int, seed) -> list[np.ndarray]:
    """``n`` uniform draws with replacement, reproducible per seed."""
    size = len(buffer)
    if size == 0:
        raise ValueError("cannot sample from an empty buffer")
    idx = np.random.default_rng(seed).integers(0, size, size=n)
    return [f[idx] for f in buffer.contents()]


def fit(
    net: MLP,
    x: np.ndarray,
    y: np.ndarray,
    *,
    loss: Loss,
    steps: int,
    batch_size: int,
    lr: float,
    rng: np.random.Generator,
    weights=None,
    optimizer: str = "sgd",
) -> float:
    """Minibatch training; returns the loss of the last step."""
    opt = make_optimizer(optimizer, lr)
    last = float("nan")
    for _ in range(steps):
        idx = rng.integers(0, len(x), size=min(batch_size, len(x)))
        w = None if weights is None else weights[idx]
        last = train_step(net, x[idx], y[idx], loss, lr, w, opt)
    return last
