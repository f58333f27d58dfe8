"""Pure numpy fallback for the averaging rounds."""

import numpy as np


def average_rounds(indptr, indices, data, x_in, spread_tol, max_rounds):
    """Apply x <- A x until max(x) - min(x) <= spread_tol.

    Returns the averaged vector and the number of rounds performed.
    """
    cur = np.array(x_in, dtype=np.float64, copy=True)
    if cur.size == 0:
        return cur, 0
    starts = np.asarray(indptr[:-1])
    rounds = 0
    while cur.max() - cur.min() > spread_tol and rounds < max_rounds:
        # every row holds its diagonal entry, so no segment is empty
        cur = np.add.reduceat(data * cur[indices], starts)
        rounds += 1
    return cur, rounds
