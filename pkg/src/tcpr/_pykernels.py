"""NumPy implementations of the hot loops in ``_ckernels``."""

import numpy as np

_BLOCK = 8192


def topk_cosine(feats, inv_norms, probe, k):
    n = feats.shape[0]
    k = min(int(k), n)
    if k <= 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    sims = np.empty(n)
    for start in range(0, n, _BLOCK):
        block = feats[start:start + _BLOCK].astype(np.float64)
        sims[start:start + _BLOCK] = block @ probe
    sims *= inv_norms
    np.clip(sims, -1.0, 1.0, out=sims)
    if k < n:
        part = np.argpartition(-sims, k - 1)[:k]
        # argpartition picks arbitrarily among ties at the boundary; widen
        # to every row reaching the k-th value, then break ties by index.
        cand = np.flatnonzero(sims >= sims[part].min())
    else:
        cand = np.arange(n)
    order = np.lexsort((cand, -sims[cand]))[:k]
    idx = cand[order].astype(np.int64)
    return idx, sims[idx]


def ncc_accuracy(protos, queries):
    # (T, C, Q, 1, D) - (T, 1, 1, C, D) -> squared distances (T, C, Q, C)
    diff = queries[:, :, :, None, :] - protos[:, None, None, :, :]
    dist = np.einsum("tcqpd,tcqpd->tcqp", diff, diff)
    pred = dist.argmin(axis=-1)
    truth = np.arange(queries.shape[1])[None, :, None]
    return (pred == truth).mean(axis=(1, 2))
