"""Fully connected ReLU networks with hand-written backprop and ADAM.

A :class:`PolicyNet` holds ``G`` independent MLPs of identical shape (an
ensemble; ``G = 1`` is an ordinary network). Inputs are shaped (B, G, n0)
and outputs (B, G, nL); every group sees only its own slice.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    sizes: tuple[int, ...]
    n_groups: int = 1

    def __post_init__(self) -> None:
        if len(self.sizes) < 2:
            raise ValueError("an MLP needs at least an input and an output size")
        if any(int(s) < 1 for s in self.sizes) or self.n_groups < 1:
            raise ValueError("layer sizes and group count must be >= 1")

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def n_params(self) -> int:
        per = sum(a * b + b for a, b in zip(self.sizes[:-1], self.sizes[1:]))
        return self.n_groups * per


@dataclass
class PolicyNet:
    spec: MlpSpec
    weights: list[np.ndarray]  # (G, n_in, n_out) per layer
    biases: list[np.ndarray]  # (G, n_out) per layer
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    def __post_init__(self) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in self.params()]
            self.v = [np.zeros_like(p) for p in self.params()]

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "PolicyNet":
        return PolicyNet(
            self.spec,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            [x.copy() for x in self.m],
            [x.copy() for x in self.v],
            self.step,
        )

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params())


def init_net(spec: MlpSpec, rng: np.random.Generator, out_scale: float = 1.0) -> PolicyNet:
    """He-uniform weights, zero biases; ``out_scale`` shrinks the output layer."""
    weights, biases = [], []
    for i, (n_in, n_out) in enumerate(zip(spec.sizes[:-1], spec.sizes[1:])):
        bound = np.sqrt(6.0 / n_in) * (out_scale if i == spec.n_layers - 1 else 1.0)
        weights.append(rng.uniform(-bound, bound, size=(spec.n_groups, n_in, n_out)))
        biases.append(np.zeros((spec.n_groups, n_out)))
    return PolicyNet(spec, weights, biases)


def zeros_like_net(spec: MlpSpec) -> PolicyNet:
    shapes = list(zip(spec.sizes[:-1], spec.sizes[1:]))
    return PolicyNet(
        spec,
        [np.zeros((spec.n_groups, a, b)) for a, b in shapes],
        [np.zeros((spec.n_groups, b)) for _, b in shapes],
    )


def mlp_forward(net: PolicyNet, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Returns the linear output of the last layer and the layer inputs for backprop."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[1:] != (net.spec.n_groups, net.spec.sizes[0]):
        raise ValueError(f"input must be (B, {net.spec.n_groups}, {net.spec.sizes[0]}), got {x.shape}")
    cache = []
    last = net.spec.n_layers - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        cache.append(x)
        x = np.einsum("bgi,gio->bgo", x, w) + b
        if i < last:
            x = np.maximum(x, 0.0)
    return x, cache


def mlp_backward(net: PolicyNet, cache: list[np.ndarray], grad_out: np.ndarray) -> list[np.ndarray]:
    """Gradient of sum(grad_out * output) w.r.t. every parameter, summed over the batch.

    Returned in the order of :meth:`PolicyNet.params`.
    """
    g = np.asarray(grad_out, dtype=float)
    n = net.spec.n_layers
    gw: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for i in range(n - 1, -1, -1):
        x_in = cache[i]
        gw[i] = np.einsum("bgi,bgo->gio", x_in, g)
        gb[i] = g.sum(axis=0)
        if i:
            g = np.einsum("bgo,gio->bgi", g, net.weights[i]) * (x_in > 0)
    return [*gw, *gb]


def adam_step(
    net: PolicyNet,
    grads: list[np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    maximize: bool = False,
) -> PolicyNet:
    """In-place bias-corrected ADAM update; ``maximize`` ascends instead of descending."""
    net.step += 1
    t = net.step
    sign = 1.0 if maximize else -1.0
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(net.params(), grads, net.m, net.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        p += sign * lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return net


def save_net(net: PolicyNet, path, extra: dict | None = None) -> None:
    header = {
        "version": CHECKPOINT_VERSION,
        "sizes": list(net.spec.sizes),
        "n_groups": net.spec.n_groups,
        "step": net.step,
        "extra": extra or {},
    }
    arrays = {"header": np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)}
    for name, group in (("w", net.weights), ("b", net.biases), ("m", net.m), ("v", net.v)):
        for i, a in enumerate(group):
            arrays[f"{name}{i}"] = a
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_net(path) -> tuple[PolicyNet, dict]:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        spec = MlpSpec(tuple(header["sizes"]), header["n_groups"])
        n_params = 2 * spec.n_layers
        get = lambda name, k: [data[f"{name}{i}"].copy() for i in range(k)]  # noqa: E731
        net = PolicyNet(
            spec,
            get("w", spec.n_layers),
            get("b", spec.n_layers),
            get("m", n_params),
            get("v", n_params),
            int(header["step"]),
        )
    return net, header["extra"]
