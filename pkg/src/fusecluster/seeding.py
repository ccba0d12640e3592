import zlib

import numpy as np

STAGES = ("codebook", "nmf", "readout", "mc", "synth")


def stage_seed(root: int, stage: str) -> int:
    """Derive a stage's integer seed from the root seed.

    Depends only on ``(root, stage)`` so a stage run on its own draws the same
    numbers as inside a full pipeline run.
    """
    ss = np.random.SeedSequence([int(root), zlib.crc32(stage.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])
