import hashlib

import numpy as np


def stable_hash(text: str) -> int:
    """64-bit digest of a string; unlike hash() it does not change between processes."""
    return int.from_bytes(
        hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little"
    )


def sample_rng(seed: int, sample_id: str, *extra: int) -> np.random.Generator:
    """Generator keyed by (seed, sample_id, *extra), independent of iteration order."""
    return np.random.default_rng(
        np.random.SeedSequence([seed, stable_hash(sample_id), *extra])
    )


def signed_exponential(
    rng: np.random.Generator, scale: float, size: tuple[int, ...]
) -> np.ndarray:
    """
    One-sided exponential draws of mean `scale` with an independent random sign.

    Each draw consumes its own pair of uniforms in row-major order, so the
    leading rows do not change when trailing rows are added.
    """
    uniform = rng.random(size=(*size, 2))
    magnitude = -np.log1p(-uniform[..., 0])
    sign = np.where(uniform[..., 1] < 0.5, -1.0, 1.0)
    return scale * sign * magnitude
