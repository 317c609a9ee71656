import numpy as np
import pytest

from gsmark import ldpc

DEFAULT_CODE_SEED = 1


@pytest.fixture(scope="session")
def default_code():
    """The (1024, 256) rate-1/4 code used by the pipeline defaults."""
    return ldpc.build_code(1024, 256, 3, 4, DEFAULT_CODE_SEED)


@pytest.fixture(scope="session")
def small_code():
    """Tiny (8, 2) code whose four codewords can be enumerated (dmin = 4 at this seed)."""
    return ldpc.build_code(8, 2, 3, 4, 1)


def gf2_rank(matrix: np.ndarray) -> int:
    """Row-echelon rank over GF(2); written independently of the package path."""
    work = matrix.copy().astype(np.uint8)
    rank = 0
    cols = work.shape[1]
    for col in range(cols):
        rows = np.nonzero(work[rank:, col])[0]
        if rows.size == 0:
            continue
        pivot = rank + rows[0]
        work[[rank, pivot]] = work[[pivot, rank]]
        others = np.nonzero(work[:, col])[0]
        others = others[others != rank]
        work[others] ^= work[rank]
        rank += 1
        if rank == work.shape[0]:
            break
    return rank
