"""Pure numpy fallback for the nearest-neighbour kernels.

Chunked brute force over the index's points in original order, so ``argmin``
already breaks ties towards the lowest point id. Distances are accumulated
in the same operation order as the compiled kernel, which keeps the two
backends bitwise identical.
"""

import numpy as np

_CHUNK_ELEMS = 1 << 21


def transform_points(source, rotation, translation):
    s = np.asarray(source, dtype=np.float64)
    R = np.asarray(rotation, dtype=np.float64)
    t = np.asarray(translation, dtype=np.float64)
    s0, s1, s2 = s[:, 0], s[:, 1], s[:, 2]
    out = np.empty_like(s)
    for r in range(3):
        out[:, r] = R[r, 0] * s0 + R[r, 1] * s1 + R[r, 2] * s2 + t[r]
    return out


def query(index, queries):
    q = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
    pts = index.points
    n = pts.shape[0]
    out_ids = np.empty(q.shape[0], dtype=np.int64)
    out_d2 = np.empty(q.shape[0], dtype=np.float64)
    step = max(1, _CHUNK_ELEMS // max(n, 1))
    px, py, pz = pts[:, 0], pts[:, 1], pts[:, 2]
    for start in range(0, q.shape[0], step):
        block = q[start:start + step]
        dx = block[:, 0:1] - px
        dy = block[:, 1:2] - py
        dz = block[:, 2:3] - pz
        d2 = dx * dx + dy * dy + dz * dz
        j = np.argmin(d2, axis=1)
        out_ids[start:start + step] = j
        out_d2[start:start + step] = d2[np.arange(block.shape[0]), j]
    return out_ids, out_d2


def query_transformed(index, source, rotation, translation):
    return query(index, transform_points(source, rotation, translation))
