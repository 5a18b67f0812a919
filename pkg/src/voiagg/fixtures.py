"""Bundled example chains.

``ncd4``
    9 states in blocks of sizes 3, 2, 2, 2 with coupling strength 0.03.
``duplicated``
    9 states where the pairs (0, 1), (2, 3), (4, 5) and (6, 7) have
    identical transition rows.

Both are stored as chain CSV files under ``data/`` and can be rebuilt
bit-for-bit with :func:`build`.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .chain import NcdSpec, TransitionModel, generate_ncd, realize_ncd

NCD4_SPEC = NcdSpec((3, 2, 2, 2), 0.03)
NCD4_SEED = 0
DUPLICATED_SEED = 7
DUPLICATED_PAIRS = ((0, 1), (2, 3), (4, 5), (6, 7))

NAMES = ("ncd4", "duplicated")


def duplicated_rows_chain(seed: int = DUPLICATED_SEED) -> TransitionModel:
    """Random positive 9-state chain whose paired states share one transition row."""
    rng = np.random.default_rng(seed)
    distinct = rng.dirichlet(np.full(9, 2.0), size=5)
    rows = [distinct[k] for k in (0, 0, 1, 1, 2, 2, 3, 3, 4)]
    return TransitionModel(np.array(rows))


def ncd4_spec() -> NcdSpec:
    """Realised block structure (``pi_star`` and coupling) of the ``ncd4`` fixture."""
    return realize_ncd(NCD4_SPEC, NCD4_SEED)


def build(name: str) -> TransitionModel:
    if name == "ncd4":
        return generate_ncd(NCD4_SPEC, NCD4_SEED)
    if name == "duplicated":
        return duplicated_rows_chain()
    raise KeyError(f"unknown fixture {name!r}; choose from {NAMES}")


def path(name: str):
    if name not in NAMES:
        raise KeyError(f"unknown fixture {name!r}; choose from {NAMES}")
    return resources.files("voiagg") / "data" / f"{name}.csv"


def load(name: str) -> TransitionModel:
    from .io import read_chain

    with resources.as_file(path(name)) as p:
        return read_chain(p)


__all__ = ["DUPLICATED_PAIRS", "NAMES", "build", "duplicated_rows_chain", "load", "ncd4_spec", "path"]
