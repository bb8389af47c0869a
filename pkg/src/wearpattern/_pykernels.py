"""Pure-numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable, and as the
reference the extension is tested against.
"""
import numpy as np


def sbd_matrix(A, B):
    """Shape-based distance between every row of ``A`` and every row of ``B``.

    Rows must already be z-normalized; all-zero rows stand for constant
    series. Returns ``(dist, shift)`` where ``shift[i, j]`` is the circular
    shift ``s`` maximizing ``sum_t A[i, t] * B[j, (t + s) % L]`` (smallest
    ``s`` on ties). Pairs of two zero rows get ``nan``.
    """
    A = np.ascontiguousarray(A, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    L = A.shape[1]
    na = np.sqrt(np.einsum("ij,ij->i", A, A))
    nb = np.sqrt(np.einsum("ij,ij->i", B, B))
    # cc[s, i, j] = sum_t A[i, t] * B[j, (t + s) % L]
    cc = np.empty((L, A.shape[0], B.shape[0]))
    for s in range(L):
        cc[s] = A @ np.roll(B, -s, axis=1).T
    shift = cc.argmax(axis=0)
    best = np.take_along_axis(cc, shift[None], axis=0)[0]
    denom = np.outer(na, nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        ncc = np.where(denom > 0, best / np.where(denom > 0, denom, 1.0), 0.0)
    dist = 1.0 - ncc
    both_zero = (na[:, None] == 0) & (nb[None, :] == 0)
    dist[both_zero] = np.nan
    shift[denom == 0] = 0
    return dist, shift


def som_train(codebook, data, order, grid_sq, lr0, sigma0, tau):
    """Online SOM updates, in place on ``codebook``.

    At step ``t`` the sample ``data[order[t]]`` pulls every unit toward it
    with weight ``lr(t) * exp(-grid_sq[bmu, u] / (2 sigma(t)^2))`` where
    ``lr(t) = lr0 exp(-t / tau)`` and ``sigma(t) = sigma0 exp(-t / tau)``.
    The BMU is the unit with the smallest squared distance (lowest index on
    ties).
    """
    for t in range(len(order)):
        x = data[order[t]]
        diff = x - codebook
        bmu = int(np.argmin(np.einsum("ij,ij->i", diff, diff)))
        decay = np.exp(-t / tau)
        lr = lr0 * decay
        sigma = sigma0 * decay
        h = lr * np.exp(-grid_sq[bmu] / (2.0 * sigma * sigma))
        codebook += h[:, None] * diff
    return codebook


def optics_order(D, core, max_eps):
    """OPTICS walk over a dense distance matrix.

    Returns ``(ordering, reachability, predecessor)``. Unreached points carry
    ``inf`` reachability; the next point is always the unprocessed one with
    the smallest reachability, lowest index on ties.
    """
    n = D.shape[0]
    reach = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.intp)
    done = np.zeros(n, dtype=bool)
    ordering = np.empty(n, dtype=np.intp)
    for step in range(n):
        cand = np.where(done, np.inf, reach)
        p = int(np.argmin(cand))
        if not np.isfinite(cand[p]):
            p = int(np.flatnonzero(~done)[0])
        done[p] = True
        ordering[step] = p
        if core[p] <= max_eps:
            new = np.maximum(core[p], D[p])
            upd = (~done) & (D[p] <= max_eps) & (new < reach)
            reach[upd] = new[upd]
            pred[upd] = p
    return ordering, reach, pred
