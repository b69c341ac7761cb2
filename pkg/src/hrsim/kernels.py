"""Hot inner loops with numba and pure-numpy implementations.

Every public function dispatches on the selected backend (see
:mod:`hrsim.backend`); the ``*_numpy`` / ``*_numba`` variants stay
importable for the parity tests and the backend benchmark.  All kernels
take pre-drawn random inputs, so a given random stream produces the same
trajectory on either backend.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .backend import USE_NUMBA

_TINY_SPEED2 = 1e-24


# ---------------------------------------------------------------- ergodic move

def ergodic_update_numpy(pos, vel, turn_u, gauss, rad_u, drift,
                         turn_prob, spacing, extent):
    """One bounded exploration step, in place.

    Molecules keep their direction with probability 1 - turn_prob
    (persistent walk, so the causal cone is swept ballistically); on a
    turn the velocity is redrawn uniformly from the ball of radius
    1 - |drift| centered at the drift vector, which keeps every draw
    inside the unit causal cone.  Positions advance by velocity * spacing
    and reflect at the box walls.
    """
    dnorm = np.sqrt(drift[0] ** 2 + drift[1] ** 2 + drift[2] ** 2)
    speed2 = vel[:, 0] ** 2 + vel[:, 1] ** 2 + vel[:, 2] ** 2
    resample = (turn_u < turn_prob) | (speed2 < _TINY_SPEED2)
    g = gauss[resample]
    gn = np.sqrt(g[:, 0] ** 2 + g[:, 1] ** 2 + g[:, 2] ** 2)
    gn[gn < 1e-300] = 1.0
    r = np.cbrt(rad_u[resample]) * (1.0 - dnorm)
    vel[resample] = drift + g * (r / gn)[:, None]
    pos += vel * spacing
    for ax in range(3):
        over = pos[:, ax] > extent
        pos[over, ax] = 2.0 * extent - pos[over, ax]
        vel[over, ax] = -vel[over, ax]
        under = pos[:, ax] < -extent
        pos[under, ax] = -2.0 * extent - pos[under, ax]
        vel[under, ax] = -vel[under, ax]


# ----------------------------------------------------------- residual matrix

def residual_matrix_numpy(weights_a, phases_a, weights_b, phases_b):
    """Pairwise constraint residuals |n1k n1l e^(i(p1k+p1l)) + n2k n2l
    e^(i(p2k+p2l))|, normalized by the product of weight norms."""
    ca = weights_a * np.exp(1j * phases_a)
    cb = weights_b * np.exp(1j * phases_b)
    det = np.outer(ca[:, 0], cb[:, 0]) + np.outer(ca[:, 1], cb[:, 1])
    norms = np.outer(np.sqrt((weights_a ** 2).sum(1)),
                     np.sqrt((weights_b ** 2).sum(1)))
    return np.abs(det) / norms


# ------------------------------------------------------- coincidence queries

def cross_hits_numpy(pos_a, pos_b, radius):
    """hit_a[i] true iff some b-molecule lies within radius of a-molecule
    i (and symmetrically for hit_b)."""
    tree_a = cKDTree(pos_a)
    tree_b = cKDTree(pos_b)
    da, _ = tree_b.query(pos_a, k=1, distance_upper_bound=radius * (1 + 1e-12))
    db, _ = tree_a.query(pos_b, k=1, distance_upper_bound=radius * (1 + 1e-12))
    return da <= radius, db <= radius


def near_hits_numpy(query, points, radius):
    """hit[i] true iff some point lies within radius of query row i."""
    if len(points) == 0 or len(query) == 0:
        return np.zeros(len(query), dtype=bool)
    d, _ = cKDTree(points).query(query, k=1,
                                 distance_upper_bound=radius * (1 + 1e-12))
    return d <= radius


def batch_cross_hits_numpy(pos, n_a, radius, active):
    """Brute-force per-trial coincidence flags for a (B, N, 3) batch."""
    B, N, _ = pos.shape
    hits = np.zeros((B, N), dtype=bool)
    act = np.flatnonzero(active)
    if act.size == 0:
        return hits
    pa = pos[act, :n_a]
    pb = pos[act, n_a:]
    d2 = ((pa[:, :, None, :] - pb[:, None, :, :]) ** 2).sum(-1)
    r2 = radius * radius
    hits[act, :n_a] = d2.min(axis=2) <= r2
    hits[act, n_a:] = d2.min(axis=1) <= r2
    return hits


if USE_NUMBA:
    from numba import njit, prange

    @njit(cache=True)
    def _ergodic_update_numba(pos, vel, turn_u, gauss, rad_u, drift,
                              turn_prob, spacing, extent):
        n = pos.shape[0]
        dnorm = np.sqrt(drift[0] ** 2 + drift[1] ** 2 + drift[2] ** 2)
        for i in range(n):
            speed2 = vel[i, 0] ** 2 + vel[i, 1] ** 2 + vel[i, 2] ** 2
            if turn_u[i] < turn_prob or speed2 < _TINY_SPEED2:
                gn = np.sqrt(gauss[i, 0] ** 2 + gauss[i, 1] ** 2
                             + gauss[i, 2] ** 2)
                if gn < 1e-300:
                    gn = 1.0
                r = np.cbrt(rad_u[i]) * (1.0 - dnorm)
                for ax in range(3):
                    vel[i, ax] = drift[ax] + gauss[i, ax] * (r / gn)
            for ax in range(3):
                pos[i, ax] += vel[i, ax] * spacing
                if pos[i, ax] > extent:
                    pos[i, ax] = 2.0 * extent - pos[i, ax]
                    vel[i, ax] = -vel[i, ax]
                elif pos[i, ax] < -extent:
                    pos[i, ax] = -2.0 * extent - pos[i, ax]
                    vel[i, ax] = -vel[i, ax]

    def ergodic_update_numba(pos, vel, turn_u, gauss, rad_u, drift,
                             turn_prob, spacing, extent):
        _ergodic_update_numba(pos, vel, turn_u, gauss, rad_u,
                              np.asarray(drift, dtype=np.float64),
                              turn_prob, spacing, extent)

    @njit(cache=True, parallel=True)
    def _residual_matrix_numba(weights_a, phases_a, weights_b, phases_b, out):
        na = weights_a.shape[0]
        nb = weights_b.shape[0]
        for i in prange(na):
            w1a = weights_a[i, 0]
            w2a = weights_a[i, 1]
            norm_a = np.sqrt(w1a * w1a + w2a * w2a)
            c1a = w1a * np.exp(1j * phases_a[i, 0])
            c2a = w2a * np.exp(1j * phases_a[i, 1])
            for j in range(nb):
                w1b = weights_b[j, 0]
                w2b = weights_b[j, 1]
                norm_b = np.sqrt(w1b * w1b + w2b * w2b)
                c1b = w1b * np.exp(1j * phases_b[j, 0])
                c2b = w2b * np.exp(1j * phases_b[j, 1])
                out[i, j] = abs(c1a * c1b + c2a * c2b) / (norm_a * norm_b)

    def residual_matrix_numba(weights_a, phases_a, weights_b, phases_b):
        out = np.empty((weights_a.shape[0], weights_b.shape[0]))
        _residual_matrix_numba(weights_a, phases_a, weights_b, phases_b, out)
        return out

    _CELL_OFF = np.int64(1) << np.int64(20)

    @njit(cache=True)
    def _cell_key(x, y, z, inv_r):
        cx = np.int64(np.floor(x * inv_r)) + _CELL_OFF
        cy = np.int64(np.floor(y * inv_r)) + _CELL_OFF
        cz = np.int64(np.floor(z * inv_r)) + _CELL_OFF
        return (cx << np.int64(42)) | (cy << np.int64(21)) | cz

    @njit(cache=True)
    def _has_neighbor(query, points, radius):
        """Cell-list membership query: any point within radius of each
        query row.  Cells have side = radius, so scanning the 27
        neighboring cells is exhaustive."""
        inv_r = 1.0 / radius
        r2 = radius * radius
        npts = points.shape[0]
        keys = np.empty(npts, dtype=np.int64)
        for j in range(npts):
            keys[j] = _cell_key(points[j, 0], points[j, 1], points[j, 2], inv_r)
        order = np.argsort(keys)
        skeys = keys[order]
        nq = query.shape[0]
        out = np.zeros(nq, dtype=np.bool_)
        for i in range(nq):
            qx, qy, qz = query[i, 0], query[i, 1], query[i, 2]
            cx = np.int64(np.floor(qx * inv_r)) + _CELL_OFF
            cy = np.int64(np.floor(qy * inv_r)) + _CELL_OFF
            cz = np.int64(np.floor(qz * inv_r)) + _CELL_OFF
            found = False
            for dx in range(-1, 2):
                if found:
                    break
                for dy in range(-1, 2):
                    if found:
                        break
                    for dz in range(-1, 2):
                        key = ((cx + dx) << np.int64(42)) \
                            | ((cy + dy) << np.int64(21)) | (cz + dz)
                        lo = np.searchsorted(skeys, key)
                        hi = np.searchsorted(skeys, key, side='right')
                        for s in range(lo, hi):
                            j = order[s]
                            d2 = (points[j, 0] - qx) ** 2 \
                                + (points[j, 1] - qy) ** 2 \
                                + (points[j, 2] - qz) ** 2
                            if d2 <= r2:
                                found = True
                                break
                        if found:
                            break
            out[i] = found
        return out

    def cross_hits_numba(pos_a, pos_b, radius):
        return _has_neighbor(pos_a, pos_b, radius), \
            _has_neighbor(pos_b, pos_a, radius)

    def near_hits_numba(query, points, radius):
        if len(points) == 0 or len(query) == 0:
            return np.zeros(len(query), dtype=bool)
        return _has_neighbor(np.ascontiguousarray(query),
                             np.ascontiguousarray(points), radius)

    @njit(cache=True, parallel=True)
    def _batch_cross_hits_numba(pos, n_a, r2, active, hits):
        B, N, _ = pos.shape
        for b in prange(B):
            if not active[b]:
                continue
            for i in range(n_a):
                for j in range(n_a, N):
                    d2 = (pos[b, i, 0] - pos[b, j, 0]) ** 2 \
                        + (pos[b, i, 1] - pos[b, j, 1]) ** 2 \
                        + (pos[b, i, 2] - pos[b, j, 2]) ** 2
                    if d2 <= r2:
                        hits[b, i] = True
                        hits[b, j] = True
        return hits

    def batch_cross_hits_numba(pos, n_a, radius, active):
        hits = np.zeros(pos.shape[:2], dtype=bool)
        _batch_cross_hits_numba(pos, n_a, radius * radius,
                                np.ascontiguousarray(active), hits)
        return hits

    ergodic_update = ergodic_update_numba
    residual_matrix = residual_matrix_numba
    cross_hits = cross_hits_numba
    near_hits = near_hits_numba
    batch_cross_hits = batch_cross_hits_numba
else:
    ergodic_update = ergodic_update_numpy
    residual_matrix = residual_matrix_numpy
    cross_hits = cross_hits_numpy
    near_hits = near_hits_numpy
    batch_cross_hits = batch_cross_hits_numpy
