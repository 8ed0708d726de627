"""
Small feed-forward networks with hand-written reverse mode, and AdamW.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import InvalidArgumentError

DEFAULT_HIDDEN = (64, 64, 64)


class FeedForwardNet:
    """
    MLP on the concatenated input [t, x] with ReLU hidden layers and linear output.

    Args:
        widths: Layer widths, first = d + 1, last = d
        rng: Generator for He-style uniform initialization (bound √(6/fan_in))
    """

    def __init__(self, widths: Sequence[int], rng: Optional[np.random.Generator] = None):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise InvalidArgumentError(f"invalid layer widths {widths}")
        if widths[0] != widths[-1] + 1:
            raise InvalidArgumentError("input width must be output width + 1 (time input)")
        self.widths = widths
        rng = np.random.default_rng(rng)
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = np.sqrt(6.0 / fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-1.0 / np.sqrt(fan_in), 1.0 / np.sqrt(fan_in), size=fan_out))
        self._tape: Optional[Tuple[List[np.ndarray], List[np.ndarray]]] = None

    @classmethod
    def for_dim(cls, d: int, hidden: Sequence[int] = DEFAULT_HIDDEN, rng: Optional[np.random.Generator] = None):
        return cls([d + 1, *hidden, d], rng)

    @property
    def dim(self) -> int:
        return self.widths[-1]

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in the order W0, b0, W1, b1, ..."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend([W, b])
        return out

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        offset = 0
        for p in self.parameters():
            p[...] = flat[offset:offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != flat.size:
            raise InvalidArgumentError(f"expected {offset} parameters, got {flat.size}")

    def _inputs(self, t, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise InvalidArgumentError(f"expected inputs with {self.dim} columns, got {x.shape[1]}")
        t = np.broadcast_to(np.asarray(t, dtype=float).reshape(-1, 1), (x.shape[0], 1))
        return np.concatenate([t, x], axis=1)

    def forward(self, t, x: np.ndarray) -> np.ndarray:
        """
        Evaluate the network and record activations for :meth:`backward`.

        Args:
            t: Normalized time, scalar or (n,)
            x: States (n, d) or (d,)

        Returns:
            Outputs with the same leading shape as x
        """
        single = np.asarray(x).ndim == 1
        h = self._inputs(t, x)
        activations = [h]
        pre = []
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            pre.append(z)
            h = z if i == last else np.maximum(z, 0.0)
            if i != last:
                activations.append(h)
        self._tape = (activations, pre)
        return h[0] if single else h

    __call__ = forward

    def backward(self, grad_out: np.ndarray) -> List[np.ndarray]:
        """
        Reverse pass for the most recent :meth:`forward`.

        Args:
            grad_out: dL/d(output), same shape as the forward output

        Returns:
            Gradients matching :meth:`parameters`

        Raises:
            InvalidArgumentError: If no forward pass was recorded or shapes differ
        """
        if self._tape is None:
            raise InvalidArgumentError("backward called before forward")
        activations, pre = self._tape
        g = np.atleast_2d(np.asarray(grad_out, dtype=float))
        if g.shape != pre[-1].shape:
            raise InvalidArgumentError(f"upstream gradient shape {g.shape} does not match output {pre[-1].shape}")
        grads: List[np.ndarray] = []
        for i in range(len(self.weights) - 1, -1, -1):
            grads.append(g.sum(axis=0))
            grads.append(activations[i].T @ g)
            if i > 0:
                g = (g @ self.weights[i].T) * (pre[i - 1] > 0)
        return grads[::-1]

    def to_dict(self) -> dict:
        return {"W": [W.tolist() for W in self.weights], "b": [b.tolist() for b in self.biases]}

    @classmethod
    def from_dict(cls, widths: Sequence[int], data: dict) -> "FeedForwardNet":
        net = cls.__new__(cls)
        net.widths = [int(w) for w in widths]
        net.weights = [np.array(W, dtype=float) for W in data["W"]]
        net.biases = [np.array(b, dtype=float) for b in data["b"]]
        net._tape = None
        expected = list(zip(net.widths[:-1], net.widths[1:]))
        if [W.shape for W in net.weights] != expected or [b.shape for b in net.biases] != [(o,) for _, o in expected]:
            raise InvalidArgumentError("stored layer shapes do not match the architecture")
        return net


class AdamW:
    """
    AdamW with decoupled weight decay, updating parameter arrays in place.

    Args:
        params: Parameter arrays to optimize
        lr: Learning rate
        betas: (β₁, β₂)
        weight_decay: Decoupled decay factor
        eps: Denominator offset
    """

    def __init__(self, params: List[np.ndarray], lr: float = 1e-2, betas=(0.9, 0.999),
                 weight_decay: float = 1e-2, eps: float = 1e-8):
        if lr <= 0:
            raise InvalidArgumentError("learning rate must be positive")
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.weight_decay = weight_decay
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: List[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise InvalidArgumentError("gradient list does not match parameters")
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            p *= 1.0 - self.lr * self.weight_decay
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
