"""Two-receiver broadcast channels: the Blackwell channel and generic DMBCs."""

from __future__ import annotations

import numpy as np

from .prob import ConditionalPmf, JointPmf
from .regions import InputStructure

# x -> (y1, y2)
BLACKWELL_MAP = np.array([[0, 0], [0, 1], [1, 0]], dtype=np.int8)


class GenericBC:
    """Finite-alphabet broadcast channel with law ``P(y1, y2 | x)``.

    The law's output index is ``y1 * y2_size + y2``.
    """

    def __init__(self, law: ConditionalPmf, y1_size: int, y2_size: int):
        if law.output_size != y1_size * y2_size:
            raise ValueError(f"law has {law.output_size} outputs, expected {y1_size}*{y2_size}")
        self.law = law
        self.y_sizes = (int(y1_size), int(y2_size))
        self._cdf = np.cumsum(law.rows, axis=1)
        self._cdf[:, -1] = 1.0

    @property
    def input_size(self) -> int:
        return self.law.input_size

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.size and (x.min() < 0 or x.max() >= self.input_size):
            raise ValueError("channel input outside the alphabet")
        return x.astype(np.int64, copy=False)

    def transmit(self, x, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        x = self._check(x)
        r = rng.random(x.shape)
        # inverse-CDF draw per symbol
        joint = (r[..., None] >= self._cdf[x]).sum(axis=-1)
        joint = np.minimum(joint, self.law.output_size - 1)
        n2 = self.y_sizes[1]
        return (joint // n2).astype(np.int8), (joint % n2).astype(np.int8)

    def __repr__(self):
        return f"GenericBC(|X|={self.input_size}, |Y1|,|Y2|={self.y_sizes})"


class BlackwellChannel(GenericBC):
    """Noiseless ternary-input channel 0 -> (0,0), 1 -> (0,1), 2 -> (1,0)."""

    def __init__(self):
        rows = np.zeros((3, 4))
        for x, (y1, y2) in enumerate(BLACKWELL_MAP):
            rows[x, 2 * y1 + y2] = 1.0
        super().__init__(ConditionalPmf(rows), 2, 2)

    def transmit(self, x, rng=None):
        x = self._check(x)
        y = BLACKWELL_MAP[x]
        return y[..., 0].copy(), y[..., 1].copy()

    def __repr__(self):
        return "BlackwellChannel()"


def transmit(x, channel: GenericBC, rng=None):
    return channel.transmit(x, rng)


def blackwell_optimal_structure(glitch_to: int = 2) -> InputStructure:
    """Sum-rate optimal Blackwell structure (uniform input on {0, 1, 2}).

    ``U = Y1 ~ Ber(1/3)``, ``V = Y2`` with ``V|U=0 ~ Ber(1/2)`` and ``V|U=1 = 0``.
    The pair ``(u, v) = (1, 1)`` has zero probability; ``glitch_to`` picks the
    input it is sent as if a finite-length encoder produces it anyway
    (2 keeps ``y1 = u``, 1 keeps ``y2 = v``).
    """
    if glitch_to not in (1, 2):
        raise ValueError("the (1, 1) glitch must map to input 1 or 2")
    puv = JointPmf([[1 / 3, 1 / 3], [1 / 3, 0.0]])
    g = np.array([[0, 1], [2, glitch_to]])
    return InputStructure(puv, g, BlackwellChannel())
