"""Counter-based noise streams, one per oscillator.

Each stream is a Philox generator keyed by (seed, stream index), so the
draws seen by oscillator j do not depend on how many other oscillators
exist or on how the steps are chunked.
"""
from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def _generator(seed: int, key: tuple) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


class NoiseStream:
    """Standard normal increments for an array of independent streams.

    ``shape`` indexes the streams (for example (B, N) for B batched
    ensembles of N oscillators); ``dim`` is the number of components each
    stream produces per step (1 for phases, d for vectors on S^{d-1}).
    """

    def __init__(self, seed: int, shape, dim: int = 1, tag: int = 0):
        self.seed = int(seed) & SEED_MASK
        self.shape = tuple(int(s) for s in shape)
        self.dim = int(dim)
        self.tag = int(tag)
        self._gens = [_generator(self.seed, (self.tag,) + idx) for idx in np.ndindex(*self.shape)]
        self.steps_drawn = 0

    def draw(self, nsteps: int) -> np.ndarray:
        """Increments of shape (nsteps, *shape) or (nsteps, *shape, dim)."""
        nsteps = int(nsteps)
        out = np.empty((nsteps, len(self._gens), self.dim))
        for k, g in enumerate(self._gens):
            out[:, k, :] = g.standard_normal((nsteps, self.dim))
        self.steps_drawn += nsteps
        out = out.reshape((nsteps,) + self.shape + (self.dim,))
        if self.dim == 1:
            out = out[..., 0]
        return out

    def state(self) -> dict:
        return {"seed": self.seed, "shape": list(self.shape), "dim": self.dim,
                "tag": self.tag, "steps_drawn": self.steps_drawn}

    @classmethod
    def restore(cls, state: dict) -> "NoiseStream":
        ns = cls(state["seed"], state["shape"], state["dim"], state.get("tag", 0))
        # replay to the saved position; Philox draws are chunk invariant
        remaining = int(state["steps_drawn"])
        while remaining > 0:
            k = min(remaining, 4096)
            ns.draw(k)
            remaining -= k
        return ns


def make_rng(seed) -> np.random.Generator:
    """General-purpose generator for samplers and optimizers."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed) & SEED_MASK)))


def rng_state_to_json(st):
    """Bit-generator state with arrays turned into lists."""
    if st is None:
        return None
    out = {}
    for k, v in st.items():
        if isinstance(v, dict):
            out[k] = rng_state_to_json(v)
        elif isinstance(v, np.ndarray):
            out[k] = [int(t) for t in v]
        else:
            out[k] = v
    return out


def rng_state_from_json(st):
    """Inverse of rng_state_to_json."""
    if st is None:
        return None
    out = {}
    for k, v in st.items():
        if isinstance(v, dict):
            out[k] = rng_state_from_json(v)
        elif isinstance(v, list):
            out[k] = np.array(v, dtype=np.uint64)
        else:
            out[k] = v
    return out
