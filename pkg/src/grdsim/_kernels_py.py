"""Numpy implementation of the scoring accumulators (fallback backend)."""
import numpy as np


def pair_counts(t: np.ndarray, members: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.int64)
    members = np.asarray(members, dtype=np.int64)
    if members.ndim != 2 or t.shape != (members.shape[1],):
        raise ValueError(f"sample has {t.shape} cells, members have shape {members.shape}")
    tp = t > 0
    mp = members > 0
    t_sum = t.sum()
    m_sum = members.sum(axis=1)
    return np.stack(
        [
            (tp & mp).sum(axis=1),
            (tp | mp).sum(axis=1),
            np.abs(members - t).sum(axis=1),
            m_sum + t_sum,
            t_sum - m_sum,
            members @ t,
            (members * members).sum(axis=1),
        ],
        axis=1,
    ).astype(np.int64)
