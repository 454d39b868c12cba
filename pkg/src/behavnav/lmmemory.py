"""Key-value landmark memory scored by summed cosine similarity.

Keys are ``normalize(F @ descriptor)`` for m stored descriptors of each of n
landmarks; a query view of R*R region descriptors is embedded as
``normalize(W @ region)``.  The score of landmark i is the double sum of
cosines over regions and keys, which factorizes as
``(sum_l q_l) . (sum_j k_ij)`` because every vector is unit length.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

UNKNOWN = "unk"
_MAGIC = b"LMEM"
_VERSION = 1


class ShapeMismatch(ValueError):
    pass


class DegenerateEmbedding(ValueError):
    pass


class EmptyDataset(ValueError):
    pass


def _normalize(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n <= 1e-12):
        raise DegenerateEmbedding("embedding produced a zero vector")
    return v / n, n


@dataclass
class MemoryStore:
    raw: np.ndarray  # (n, m, D) stored descriptors
    values: list[str]
    F: np.ndarray
    W: np.ndarray
    alpha_unk: float = 0.0
    keys: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.reembed()

    @property
    def n(self) -> int:
        return self.raw.shape[0]

    @property
    def m(self) -> int:
        return self.raw.shape[1]

    @property
    def dim(self) -> int:
        return self.raw.shape[2]

    def reembed(self) -> None:
        self.keys, _ = _normalize(self.raw @ self.F.T)
        self._key_sum = self.keys.sum(axis=1)

    @property
    def key_sum(self) -> np.ndarray:
        return self._key_sum


@dataclass
class ScoreVector:
    alpha: np.ndarray
    alpha_unk: float


def build_memory(descriptors, values, F=None, W=None, alpha_unk: float = 0.0) -> MemoryStore:
    raw = np.asarray(descriptors, dtype=float)
    if raw.ndim != 3:
        raise ShapeMismatch(f"descriptors must be (n, m, D), got shape {raw.shape}")
    n, m, d = raw.shape
    if len(values) != n:
        raise ShapeMismatch(f"{len(values)} values for {n} landmarks")
    if len(set(values)) != n:
        raise ValueError("values must be distinct")
    F = np.eye(d) if F is None else np.array(F, dtype=float)
    W = np.eye(d) if W is None else np.array(W, dtype=float)
    if F.shape != (d, d) or W.shape != (d, d):
        raise ShapeMismatch(f"F and W must be {d}x{d}")
    return MemoryStore(raw=raw, values=list(values), F=F, W=W, alpha_unk=float(alpha_unk))


def _regions(mem: MemoryStore, view) -> np.ndarray:
    v = np.asarray(view, dtype=float)
    if v.shape[-1] != mem.dim:
        raise ShapeMismatch(f"view descriptor dim {v.shape[-1]} != memory dim {mem.dim}")
    return v.reshape(-1, mem.dim)


def score(mem: MemoryStore, view) -> ScoreVector:
    q, _ = _normalize(_regions(mem, view) @ mem.W.T)
    return ScoreVector(mem.key_sum @ q.sum(axis=0), mem.alpha_unk)


def score_batch(mem: MemoryStore, views: np.ndarray) -> np.ndarray:
    """Scores for a stack of views shaped (B, ..., D); returns (B, n)."""
    v = np.asarray(views, dtype=float)
    if v.shape[-1] != mem.dim:
        raise ShapeMismatch("view descriptor dim mismatch")
    v = v.reshape(v.shape[0], -1, mem.dim)
    q, _ = _normalize(v @ mem.W.T)
    return q.sum(axis=1) @ mem.key_sum.T


def probabilities(scores: ScoreVector) -> np.ndarray:
    z = np.append(np.asarray(scores.alpha, dtype=float), scores.alpha_unk)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def detect(mem: MemoryStore, view) -> str:
    s = score(mem, view)
    i = int(np.argmax(s.alpha))
    return mem.values[i] if s.alpha[i] > s.alpha_unk else UNKNOWN


def detect_index(alpha: np.ndarray, alpha_unk: float) -> np.ndarray:
    """Row-wise hard max; returns n (the unknown slot) where no score beats ``alpha_unk``."""
    alpha = np.atleast_2d(alpha)
    idx = alpha.argmax(axis=1)
    top = alpha[np.arange(len(alpha)), idx]
    return np.where(top > alpha_unk, idx, alpha.shape[1])


# ----------------------------------------------------------------------------
# training


def loss_and_grad(F, W, raw, views, labels, alpha_unk):
    """Mean cross-entropy over (alpha, alpha_unk) and its gradients w.r.t. F and W.

    ``labels`` hold landmark indices, with n marking the unknown class.
    """
    n, m, d = raw.shape
    X = views.reshape(-1, d)
    B = views.shape[0]
    L = X.shape[0] // B
    qh, qn = _normalize(X @ W.T)
    qs = qh.reshape(B, L, d).sum(axis=1)
    R = raw.reshape(-1, d)
    kh, kn = _normalize(R @ F.T)
    ks = kh.reshape(n, m, d).sum(axis=1)
    alpha = qs @ ks.T
    logits = np.concatenate([alpha, np.full((B, 1), alpha_unk)], axis=1)
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    rows = np.arange(B)
    loss = float(-np.log(np.maximum(p[rows, labels], 1e-300)).mean())
    g = p
    g[rows, labels] -= 1.0
    g /= B
    ga = g[:, :n]
    # every region of a view shares dL/dq_hat = dL/dqs; push it back through the normalization
    dq = np.repeat(ga @ ks, L, axis=0)
    du = (dq - qh * np.einsum("ij,ij->i", qh, dq)[:, None]) / qn
    dW = du.T @ X
    dk = np.repeat(ga.T @ qs, m, axis=0)
    dv = (dk - kh * np.einsum("ij,ij->i", kh, dk)[:, None]) / kn
    dF = dv.T @ R
    acc = float((detect_index(alpha, alpha_unk) == labels).mean())
    return loss, dF, dW, acc


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch: int = 256
    epochs: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0


class Adam:
    def __init__(self, shapes, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)


def train(mem: MemoryStore, views, labels, config: TrainConfig | None = None) -> TrainHistory:
    """Fit F and W in place; the history holds per-epoch mean loss and accuracy."""
    cfg = config or TrainConfig()
    views = np.asarray(views, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if len(views) == 0:
        raise EmptyDataset("no training views")
    if len(labels) != len(views) or labels.min() < 0 or labels.max() > mem.n:
        raise ValueError("labels must be landmark indices or n (unknown)")
    rng = np.random.default_rng(cfg.seed)
    opt = Adam([mem.F.shape, mem.W.shape], cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    hist = TrainHistory()
    for _ in range(cfg.epochs):
        order = rng.permutation(len(views))
        tot_l = tot_a = 0.0
        for s in range(0, len(order), cfg.batch):
            b = order[s:s + cfg.batch]
            loss, dF, dW, acc = loss_and_grad(mem.F, mem.W, mem.raw, views[b], labels[b], mem.alpha_unk)
            tot_l += loss * len(b)
            tot_a += acc * len(b)
            if cfg.lr > 0:
                opt.step([mem.F, mem.W], [dF, dW])
                mem.reembed()
        hist.loss.append(tot_l / len(order))
        hist.accuracy.append(tot_a / len(order))
    return hist


def calibrate_unknown(mem: MemoryStore, distractor_views, false_accept: float = 0.01) -> float:
    """Set alpha_unk so that ``false_accept`` of distractor-only views exceed it."""
    top = score_batch(mem, distractor_views).max(axis=1)
    mem.alpha_unk = float(np.quantile(top, 1.0 - false_accept))
    return mem.alpha_unk


# ----------------------------------------------------------------------------
# synthetic views


def synthetic_views(library, ids, rng: np.random.Generator, count: int, sigma: float,
                    grid: int = 7, cells: tuple[int, int] = (1, 6), unknown_frac: float = 0.2):
    """Views with a block of one landmark's cells amid background regions.

    Returns (views (count, grid, grid, D), labels) where labels index ``ids``
    and ``len(ids)`` marks a distractor-only view.
    """
    ids = np.asarray(ids)
    n = len(ids)
    views = library.distractors(rng, count * grid * grid).reshape(count, grid, grid, library.dim)
    labels = np.full(count, n, dtype=np.int64)
    for b in range(count):
        if rng.random() < unknown_frac:
            continue
        k = int(rng.integers(n))
        labels[b] = k
        c = int(rng.integers(cells[0], cells[1] + 1))
        w = int(rng.integers(1, min(c, grid) + 1))
        h = min(grid, -(-c // w))
        r0 = int(rng.integers(0, grid - h + 1))
        c0 = int(rng.integers(0, grid - w + 1))
        views[b, r0:r0 + h, c0:c0 + w] = library.noisy(int(ids[k]), rng, sigma, h * w).reshape(h, w, -1)
    return views, labels


def stored_descriptors(library, ids, m: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    return np.stack([library.noisy(int(i), rng, sigma, m) for i in ids])


@dataclass
class PretrainConfig:
    m: int = 4
    sigma: float = 0.05
    n_views: int = 8192
    n_distractor: int = 4096
    false_accept: float = 0.01
    train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=60))
    seed: int = 0


def pretrain(library, config: PretrainConfig | None = None):
    """Train F, W over the whole library and calibrate alpha_unk.

    Returns (memory over all library landmarks, history).
    """
    cfg = config or PretrainConfig()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x1E4]))
    ids = np.arange(library.size)
    raw = stored_descriptors(library, ids, cfg.m, cfg.sigma, rng)
    mem = build_memory(raw, [str(i) for i in ids])
    views, labels = synthetic_views(library, ids, rng, cfg.n_views, cfg.sigma)
    hist = train(mem, views, labels, cfg.train)
    distractors, _ = synthetic_views(library, ids, rng, cfg.n_distractor, cfg.sigma, unknown_frac=1.0)
    calibrate_unknown(mem, distractors, cfg.false_accept)
    return mem, hist


def memory_for_plan(plan, library, base: MemoryStore, m: int | None = None, sigma: float = 0.05,
                    seed: int = 0) -> MemoryStore:
    """Memory holding the plan's landmarks with place-id values, sharing the trained maps.

    When ``base`` stores the whole library (values "0".."n-1") its descriptor
    rows are reused, so keys are exactly those the embeddings were fit on.
    Otherwise fresh noisy descriptors are drawn.
    """
    m = base.m if m is None else m
    lms = sorted(plan.landmarks, key=lambda lm: lm.id)
    ids = [lm.id for lm in lms]
    row = {v: i for i, v in enumerate(base.values)}
    if m == base.m and all(str(i) in row for i in ids):
        raw = base.raw[[row[str(i)] for i in ids]]
    else:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x3A9]))
        raw = stored_descriptors(library, ids, m, sigma, rng)
    return build_memory(raw, [lm.place for lm in lms], base.F, base.W, base.alpha_unk)


# ----------------------------------------------------------------------------
# checkpoint file
#
# layout (little endian):
#   magic "LMEM", u32 version, u32 n, u32 m, u32 D, f32 alpha_unk
#   f32[D*D] F (row major), f32[D*D] W, f32[n*m*D] raw descriptors
#   u32 byte length of the value table, then the value table as UTF-8 with
#   one place id per line


def save_memory(mem: MemoryStore, path) -> None:
    table = "\n".join(mem.values).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIIIf", _VERSION, mem.n, mem.m, mem.dim, mem.alpha_unk))
        for arr in (mem.F, mem.W, mem.raw):
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        fh.write(struct.pack("<I", len(table)))
        fh.write(table)


def load_memory(path) -> MemoryStore:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValueError("not a memory checkpoint")
    version, n, m, d, a_unk = struct.unpack_from("<IIIIf", data, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 4 + struct.calcsize("<IIIIf")
    arrays = []
    for count, shape in ((d * d, (d, d)), (d * d, (d, d)), (n * m * d, (n, m, d))):
        arrays.append(np.frombuffer(data, dtype="<f4", count=count, offset=off).reshape(shape).astype(float))
        off += 4 * count
    (tlen,) = struct.unpack_from("<I", data, off)
    off += 4
    values = data[off:off + tlen].decode().split("\n") if tlen else []
    F, W, raw = arrays
    return build_memory(raw, values, F, W, a_unk)
