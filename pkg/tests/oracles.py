"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written the slow, obvious way (scalar loops,
closed-form formulas) and shares no code with the production modules.
"""

from __future__ import annotations

import math

import numpy as np


def imd_oracle(obs_values, ctc_values, mask_bits):
    """Brute-force double-loop nearest-neighbour matching distance.

    Returns (imd, imd_normalized, matches) with ties resolved to the smallest
    row-major candidate index, mirroring the documented contract.
    """
    obs = np.asarray(obs_values, dtype=np.float64)
    ctc = np.asarray(ctc_values, dtype=np.float64)
    mask = np.asarray(mask_bits, dtype=bool)
    h, w, c = obs.shape
    cand = ctc.reshape(-1, c)

    distances = []
    matches = []
    for row in range(h):
        for col in range(w):
            if not mask[row, col]:
                continue
            vec = obs[row, col]
            best_d2 = None
            best_j = -1
            for j in range(cand.shape[0]):
                d2 = 0.0
                for k in range(c):
                    diff = vec[k] - cand[j, k]
                    d2 += diff * diff
                if best_d2 is None or d2 < best_d2:
                    best_d2 = d2
                    best_j = j
            distances.append(math.sqrt(best_d2))
            matches.append(best_j)

    total = math.fsum(distances)
    count = len(distances)
    return total, total / max(1, count), np.asarray(matches, dtype=np.int64)


def bm25_idf_oracle(n_docs: int, doc_freq: int) -> float:
    return math.log(1.0 + (n_docs - doc_freq + 0.5) / (doc_freq + 0.5))


def bm25_oracle(docs: list[list[str]], query: list[str], doc_index: int,
                k1: float = 1.2, b: float = 0.75) -> float:
    """Closed-form BM25 with multiset query semantics (repeats count again)."""
    n_docs = len(docs)
    avgdl = sum(len(d) for d in docs) / n_docs if n_docs else 0.0
    doc = docs[doc_index]
    dl = len(doc)

    score = 0.0
    for term in query:
        tf = doc.count(term)
        if tf == 0:
            continue
        df = sum(1 for d in docs if term in d)
        idf = bm25_idf_oracle(n_docs, df)
        denom = tf + k1 * (1.0 - b + b * dl / avgdl)
        score += idf * tf * (k1 + 1.0) / denom
    return score


def cosine_oracle(a, b) -> float:
    a = [float(x) for x in np.asarray(a).reshape(-1)]
    b = [float(x) for x in np.asarray(b).reshape(-1)]
    dot = math.fsum(x * y for x, y in zip(a, b))
    na = math.sqrt(math.fsum(x * x for x in a))
    nb = math.sqrt(math.fsum(y * y for y in b))
    return dot / (na * nb)


def rodrigues_matrix_oracle(axis, angle_rad: float) -> np.ndarray:
    """Rotation matrix about a unit axis via the Rodrigues formula."""
    ux, uy, uz = np.asarray(axis, dtype=np.float64) / np.linalg.norm(axis)
    c = math.cos(angle_rad)
    s = math.sin(angle_rad)
    cross = np.array([[0.0, -uz, uy], [uz, 0.0, -ux], [-uy, ux, 0.0]])
    outer = np.outer([ux, uy, uz], [ux, uy, uz])
    return c * np.eye(3) + s * cross + (1.0 - c) * outer


def quat_to_matrix_oracle(q) -> np.ndarray:
    """Direct expansion of the unit-quaternion rotation matrix."""
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def pose_loss_oracle(contact_a, contact_b, up_a, up_b, fwd_a, fwd_b,
                     lambda1: float = 1.0, lambda2: float = 1.0) -> float:
    du = math.fsum((float(p) - float(q)) ** 2 for p, q in zip(contact_a, contact_b))
    dot_u = math.fsum(float(p) * float(q) for p, q in zip(up_a, up_b))
    dot_f = math.fsum(float(p) * float(q) for p, q in zip(fwd_a, fwd_b))
    dot_u = min(1.0, max(-1.0, dot_u))
    dot_f = min(1.0, max(-1.0, dot_f))
    return lambda1 * du + lambda2 * (2.0 - dot_u - dot_f)


def render_oracle(g, cam, rotation=None, translation=None, background=None):
    """Per-pixel scalar rasterization of a splat set.

    Walks every pixel and every splat in depth order, evaluating the
    projected 2D Gaussian with explicit scalar arithmetic, applying the same
    3-sigma / 1/255 truncation the renderer documents. Returns
    (color, alpha, depth) arrays.
    """
    r = np.eye(3) if rotation is None else np.asarray(rotation, dtype=np.float64)
    t = np.zeros(3) if translation is None else np.asarray(translation, dtype=np.float64)
    channels = g.channels
    bg = np.zeros(channels) if background is None else np.asarray(background, dtype=np.float64)

    mu_cam = g.mu @ r.T + t
    order = sorted(range(g.count), key=lambda i: (mu_cam[i, 2], i))

    splats = []
    for i in order:
        x, y, z = mu_cam[i]
        if z <= 1e-9 or g.opacity[i] <= 0.0:
            continue
        cov = r @ g.covariance(i) @ r.T
        jac = np.array(
            [
                [cam.fx / z, 0.0, -cam.fx * x / (z * z)],
                [0.0, cam.fy / z, -cam.fy * y / (z * z)],
            ]
        )
        s2 = jac @ cov @ jac.T
        a, b2, c = s2[0, 0], s2[0, 1], s2[1, 1]
        det = a * c - b2 * b2
        if det <= 0.0 or a <= 0.0:
            continue
        px = cam.fx * x / z + cam.cx
        py = cam.fy * y / z + cam.cy
        splats.append((a, b2, c, det, px, py, float(g.opacity[i]), g.color[i], z))

    color = np.zeros((cam.height, cam.width, channels))
    alpha_img = np.zeros((cam.height, cam.width))
    depth = np.zeros((cam.height, cam.width))
    for row in range(cam.height):
        for col in range(cam.width):
            trans = 1.0
            acc = np.zeros(channels)
            wz = 0.0
            for a, b2, c, det, px, py, opacity, rgb, z in splats:
                dx = col - px
                dy = row - py
                d2 = (c * dx * dx - 2.0 * b2 * dy * dx + a * dy * dy) / det
                alpha = opacity * math.exp(-0.5 * d2)
                if d2 > 9.0 or alpha < 1.0 / 255.0:
                    continue
                w = alpha * trans
                acc = acc + w * rgb
                wz += w * z
                trans *= 1.0 - alpha
            pixel_alpha = 1.0 - trans
            color[row, col] = acc + trans * bg
            alpha_img[row, col] = pixel_alpha
            depth[row, col] = wz / pixel_alpha if pixel_alpha > 0.0 else 0.0
    return color, alpha_img, depth
