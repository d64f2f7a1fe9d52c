"""Named, reproducible random substreams.

Every source of randomness in the package is derived from one base seed
plus a stream name (and optional index), so individual components can be
reproduced in isolation without replaying the whole pipeline.
"""

from __future__ import annotations

import zlib

import numpy as np

# Stream names used across the package.
STREAM_KB_INIT = "kb-init"
STREAM_NEGATIVE = "negative-sampling"
STREAM_EPISODE = "episode"
STREAM_MODEL_INIT = "model-init"
STREAM_SYNTH = "synth"


def substream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Generator for stream `name` under `seed`; `index` picks a member
    of an indexed family (e.g. one stream per episode)."""
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, tag, int(index)]))
