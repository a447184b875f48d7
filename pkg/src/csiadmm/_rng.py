import numpy as np

# Order is part of the reproducibility contract: append, never reorder.
STREAM_NAMES = (
    "graph",
    "cycle",
    "data",
    "shuffle",
    "coding",
    "compute",
    "comm",
    "stragglers",
)


def stream_seeds(master_seed):
    """Derive one independent integer seed per named stream from a master seed."""
    children = np.random.SeedSequence(master_seed).spawn(len(STREAM_NAMES))
    return {
        name: int(child.generate_state(1, dtype=np.uint32)[0])
        for name, child in zip(STREAM_NAMES, children)
    }


def streams(master_seed):
    return {name: np.random.default_rng(s) for name, s in stream_seeds(master_seed).items()}
