"""Row-wise channels ``y_n = F(x_n, xi_n)``.

Only the MIMO AWGN channel ships. ``ChannelSpec.kind`` is the hook for
other row-wise front-end models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ChannelSpec", "apply_channel", "lipschitz_constant"]

KINDS = ("awgn_mimo",)


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    h: np.ndarray
    noise_std: float = 0.0
    kind: str = "awgn_mimo"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}; available: {KINDS}")
        h = np.atleast_2d(np.asarray(self.h, dtype=complex))
        object.__setattr__(self, "h", h)
        if not self.noise_std >= 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")

    @property
    def n_r(self) -> int:
        return self.h.shape[0]

    @property
    def n_t(self) -> int:
        return self.h.shape[1]


def apply_channel(spec: ChannelSpec, x: np.ndarray, noise: np.ndarray | None = None) -> np.ndarray:
    """Rows ``y_n = H x_n + sigma xi_n``; ``noise`` holds unit-variance xi rows."""
    x = np.asarray(x)
    if x.shape[-1] != spec.n_t:
        raise ValueError(f"input rows have {x.shape[-1]} entries, channel expects {spec.n_t}")
    y = x @ spec.h.T
    if noise is not None and spec.noise_std > 0:
        if noise.shape != y.shape:
            raise ValueError(f"noise shape {noise.shape} does not match output shape {y.shape}")
        y = y + spec.noise_std * noise
    return y


def lipschitz_constant(spec: ChannelSpec) -> float:
    return float(np.linalg.norm(spec.h, 2))
