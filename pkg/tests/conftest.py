import math

import numpy as np
import pytest

from vecmap.geom import chamfer_distance as _chamfer_distance

ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail=""):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_polyline(rng, n=None, scale=10.0):
    n = n if n is not None else int(rng.integers(2, 13))
    while True:
        pts = rng.uniform(-scale, scale, size=(n, 2))
        if np.all(np.hypot(*np.diff(pts, axis=0).T) > 1e-6):
            return pts


# independent reference geometry, written as plain loops


def oracle_length(pts):
    return sum(math.hypot(pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1]) for i in range(len(pts) - 1))


def oracle_resample(pts, n):
    """Walk the chain with an arc-length accumulator."""
    total = oracle_length(pts)
    out = []
    for k in range(n):
        target = total * k / (n - 1)
        acc = 0.0
        for i in range(len(pts) - 1):
            seg = math.hypot(pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1])
            if acc + seg >= target or i == len(pts) - 2:
                t = 0.0 if seg == 0 else min(max((target - acc) / seg, 0.0), 1.0)
                out.append(
                    (pts[i][0] + t * (pts[i + 1][0] - pts[i][0]), pts[i][1] + t * (pts[i + 1][1] - pts[i][1]))
                )
                break
            acc += seg
    out[0] = tuple(pts[0])
    out[-1] = tuple(pts[-1])
    return out


def oracle_chamfer(a, b, samples):
    ra, rb = oracle_resample(a, samples), oracle_resample(b, samples)

    def one_way(p, q):
        return sum(min(math.hypot(x - u, y - v) for u, v in q) for x, y in p) / len(p)

    return 0.5 * (one_way(ra, rb) + one_way(rb, ra))


def oracle_point_segment(p, a, b):
    dx, dy = b[0] - a[0], b[1] - a[1]
    dd = dx * dx + dy * dy
    if dd == 0:
        return math.hypot(p[0] - a[0], p[1] - a[1])
    t = max(0.0, min(1.0, ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / dd))
    return math.hypot(p[0] - a[0] - t * dx, p[1] - a[1] - t * dy)


def oracle_chain_distance(p, chain):
    return min(oracle_point_segment(p, chain[i], chain[i + 1]) for i in range(len(chain) - 1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def oracle_zhang_suen(img):
    """Per-pixel Zhang-Suen on nested lists; pixels outside the image are 0."""
    img = [list(map(int, row)) for row in img]
    h, w = len(img), len(img[0])

    def px(r, c):
        return img[r][c] if 0 <= r < h and 0 <= c < w else 0

    while True:
        changed = False
        for sub in (1, 2):
            marked = []
            for r in range(h):
                for c in range(w):
                    if not img[r][c]:
                        continue
                    p2, p3, p4, p5 = px(r - 1, c), px(r - 1, c + 1), px(r, c + 1), px(r + 1, c + 1)
                    p6, p7, p8, p9 = px(r + 1, c), px(r + 1, c - 1), px(r, c - 1), px(r - 1, c - 1)
                    ring = [p2, p3, p4, p5, p6, p7, p8, p9, p2]
                    b = sum(ring[:8])
                    a = sum(1 for k in range(8) if ring[k] == 0 and ring[k + 1] == 1)
                    if not (2 <= b <= 6 and a == 1):
                        continue
                    if sub == 1 and p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0:
                        marked.append((r, c))
                    if sub == 2 and p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0:
                        marked.append((r, c))
            for r, c in marked:
                img[r][c] = 0
            changed = changed or bool(marked)
        if not changed:
            return img


def random_blob_mask(rng, h, w):
    """Union of a few random filled rectangles and thick strokes."""
    img = np.zeros((h, w), dtype=bool)
    for _ in range(int(rng.integers(1, 5))):
        r0, c0 = rng.integers(0, h - 1), rng.integers(0, w - 1)
        r1, c1 = r0 + rng.integers(1, max(2, h // 2)), c0 + rng.integers(1, max(2, w // 2))
        img[r0:r1, c0:c1] = True
    img &= rng.random((h, w)) > 0.05  # a few holes
    return img


def literal_merge(B, P, S, T, sigma, samples):
    """Line-by-line transcription of the pseudocode."""
    B = list(B)
    order = sorted(range(len(P)), key=lambda i: -S[i])  # SortProposalByScore
    P = [P[i] for i in order]
    S = [S[i] for i in order]
    A, AS = [], []
    while len(P) != 0:
        Flag = False
        Head, HeadScore = P.pop(0), S.pop(0)
        for Base in B:
            Sim = _chamfer_distance(Head, Base, samples)
            if Sim < T:
                Flag = True
                break
        if not Flag:
            B.append(Head)
            A.append(Head)
            AS.append(HeadScore * sigma)
    return A, AS
