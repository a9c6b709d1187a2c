"""NumPy implementations of the hot kernels (used when the extension is absent)."""

import numpy as np


def gather_scan(row_bytes):
    """Return (j, max(left_j, right_j)) minimizing the larger side; lowest j on ties."""
    total = float(sum(row_bytes))
    best_j, best = 0, float("inf")
    left = 0.0
    for j, b in enumerate(row_bytes):
        right = total - left - b
        worst = left if left > right else right
        if worst < best:
            best_j, best = j, worst
        left += b
    return best_j, best


def op_grid_search(FX, FY, PX, PY, comp_coef, A, B, Cst, best=np.inf, extra=None):
    """Minimize max(compute, per-chiplet comm) over all (px, py) candidate pairs.

    compute = comp_coef * max(FX[i]) * max(FY[j]);
    comm    = max over (x, y) of A[x,y]*PX[i,x] + B[x,y]*PY[j,y] + Cst[x,y];
    ``extra[i, j]`` (optional) is added on top of the max.
    Returns (value, i, j) of the first minimum in row-major order, or
    (best, -1, -1) when nothing beats the initial ``best``.
    """
    FX = np.asarray(FX, dtype=np.int64)
    FY = np.asarray(FY, dtype=np.int64)
    PX = np.asarray(PX, dtype=np.float64)
    PY = np.asarray(PY, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    Cst = np.asarray(Cst, dtype=np.float64)
    mfx = FX.max(axis=1).astype(np.float64)
    mfy = FY.max(axis=1).astype(np.float64)
    extra = np.zeros((FX.shape[0], FY.shape[0])) if extra is None else np.asarray(extra, dtype=np.float64)
    bterm = B[None, :, :] * PY[:, None, :]
    bi = bj = -1
    for i in range(FX.shape[0]):
        comp = (comp_coef * mfx[i]) * mfy
        aterm = A * PX[i][:, None]
        comm = ((aterm[None, :, :] + bterm) + Cst[None, :, :]).reshape(len(mfy), -1).max(axis=1)
        val = np.maximum(comp, comm) + extra[i]
        j = int(np.argmin(val))
        if val[j] < best:
            best, bi, bj = float(val[j]), i, j
    return best, bi, bj
