"""Breadth-first enumeration of the orbit of the origin under a GroupSpec.

Elements are explored layer by layer in word length.  Each layer is expanded
in fixed-size chunks (optionally on a thread pool), and candidates are
deduplicated against the two previous layers only: in a BFS over a Cayley
graph, a neighbour of a depth-L vertex has depth L-1, L or L+1.  Results are
identical for any worker count because chunking does not depend on it and the
merge is done in chunk order.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .groups import CongruencePredicate, GroupSpec
from .hyperbolic import BallPoint, IsometryElement, form_matrix

DEFAULT_CAP = 5_000_000
_CAP_SLACK = 1.25
CHUNK = 1 << 15
_MAX_TORSION = 12
_KEY_SEED = 0x5EED


class OrbitCapExceeded(RuntimeError):
    """Element cap reached; ``partial`` holds every layer kept so far."""

    def __init__(self, msg: str, partial: OrbitSet):
        super().__init__(msg)
        self.partial = partial


class TruncationWarning(UserWarning):
    """A quantity was requested beyond the orbit's completeness radius."""


def canonical_phase(m: np.ndarray) -> np.ndarray:
    """Rescale (..., d, d) matrices by a unit scalar making entry (0, 0) real positive.

    For U(n, 1), |M_00| = cosh d(0, M 0) >= 1, so the phase is never ill-defined.
    """
    m00 = m[..., 0, 0]
    if np.iscomplexobj(m):
        ph = m00 / np.abs(m00)
        return m / ph[..., None, None]
    return m * np.sign(m00)[..., None, None]


def displacement_of(m: np.ndarray) -> np.ndarray:
    return np.arccosh(np.maximum(np.abs(m[..., 0, 0]), 1.0))


def _matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # fixed summation order per entry, independent of batch size
    out = a[..., :, 0, None] * b[..., 0, None, :]
    for k in range(1, b.shape[-2]):
        out = out + a[..., :, k, None] * b[..., k, None, :]
    return out


@dataclass(frozen=True)
class Letter:
    name: str
    matrix: np.ndarray
    inverse: int
    max_run: int  # 0 means unbounded


def _projective_order(m: np.ndarray, tol: float) -> int:
    p = np.eye(m.shape[0], dtype=m.dtype)
    for k in range(1, _MAX_TORSION + 1):
        p = p @ m
        if np.abs(canonical_phase(p) - np.eye(m.shape[0])).max() < tol:
            return k
    return 0


def letters_for(spec: GroupSpec, tol: float = 1e-9) -> list[Letter]:
    """Symmetrized generating set with torsion-aware run limits.

    A generator of projective order k contributes runs of at most k // 2
    copies of itself and (k - 1) // 2 of its inverse, since longer runs equal
    shorter words.  Involutions contribute a single self-inverse letter, and
    projectively trivial generators are dropped.
    """
    real = spec.is_real
    j = form_matrix(spec.ambient_dim)
    out: list[Letter] = []
    for i, g in enumerate(spec.generators):
        m = g.matrix.real.copy() if real else g.matrix.copy()
        m = canonical_phase(m)
        order = _projective_order(m, tol)
        if order == 1:
            continue
        base = chr(ord("a") + i) if i < 26 else f"g{i}."
        inv = canonical_phase(j @ m.conj().T @ j)
        k = len(out)
        if order == 2:
            out.append(Letter(base, m, k, 1))
            continue
        run, inv_run = (order // 2, (order - 1) // 2) if order else (0, 0)
        out.append(Letter(base, m, k + 1, run))
        out.append(Letter(base.upper(), inv, k, inv_run))
    return out


@dataclass(frozen=True)
class OrbitElement:
    word: tuple[int, ...]
    matrix: IsometryElement
    image: BallPoint
    displacement: float


@dataclass(eq=False)
class OrbitSet:
    """Deduplicated orbit elements sorted by (displacement, word length, BFS order)."""

    spec: GroupSpec
    letters: list[Letter]
    matrices: np.ndarray  # (N, d, d)
    displacements: np.ndarray  # (N,)
    depths: np.ndarray  # (N,)
    node_ids: np.ndarray  # (N,) index into the BFS tables below
    bfs_parent: np.ndarray  # every explored node, including pruned stepping stones
    bfs_letter: np.ndarray
    max_word_len: int
    max_radius: float
    complete_radius: float
    dedup_tolerance: float
    frontier_min: list[float] = field(default_factory=list)

    def __len__(self):
        return self.matrices.shape[0]

    @property
    def n(self) -> int:
        return self.spec.ambient_dim

    @cached_property
    def images(self) -> np.ndarray:
        """gamma(0) for every element, shape (N, n)."""
        return self.matrices[:, 1:, 0] / self.matrices[:, 0:1, 0]

    @cached_property
    def first_rows(self) -> np.ndarray:
        return np.ascontiguousarray(self.matrices[:, 0, :])

    def word(self, i: int) -> tuple[int, ...]:
        node, out = int(self.node_ids[i]), []
        while node > 0:
            out.append(int(self.bfs_letter[node]))
            node = int(self.bfs_parent[node])
        return tuple(reversed(out))

    def word_str(self, i: int) -> str:
        return "".join(self.letters[k].name for k in self.word(i))

    def words_str(self, idx=None) -> list[str]:
        idx = np.arange(len(self)) if idx is None else np.asarray(idx)
        names = np.array([lt.name for lt in self.letters] + [""], dtype=object)
        nodes = self.node_ids[idx].copy()
        parts = []
        while np.any(nodes > 0):
            lt = np.where(nodes > 0, self.bfs_letter[nodes], len(self.letters))
            parts.append(names[lt])
            nodes = np.where(nodes > 0, self.bfs_parent[nodes], 0)
        out = np.full(len(idx), "", dtype=object)
        for p in reversed(parts):
            out = out + p
        return list(out)

    def __getitem__(self, i: int) -> OrbitElement:
        return OrbitElement(
            word=self.word(i),
            matrix=IsometryElement(self.matrices[i], check=False),
            image=BallPoint(self.images[i]),
            displacement=float(self.displacements[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, mask) -> OrbitSet:
        """Restriction to a mask of elements; the identity is always kept."""
        mask = np.asarray(mask, dtype=bool).copy()
        mask[0] = True
        return OrbitSet(
            spec=self.spec, letters=self.letters, matrices=self.matrices[mask],
            displacements=self.displacements[mask], depths=self.depths[mask],
            node_ids=self.node_ids[mask], bfs_parent=self.bfs_parent,
            bfs_letter=self.bfs_letter, max_word_len=self.max_word_len,
            max_radius=self.max_radius, complete_radius=self.complete_radius,
            dedup_tolerance=self.dedup_tolerance, frontier_min=self.frontier_min,
        )

    def within(self, radius: float) -> OrbitSet:
        return self.subset(self.displacements <= radius)

    def kernel_mask(self, pred: CongruencePredicate) -> np.ndarray:
        return pred.holds(self.matrices)

    def to_csv(self, fh=None) -> str | None:
        """Columns: word, displacement, then re/im of each image coordinate."""
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["word", "displacement"] + [f"{p}{k}" for k in range(1, self.n + 1) for p in ("re", "im")])
        for start in range(0, len(self), 1 << 16):
            idx = np.arange(start, min(len(self), start + (1 << 16)))
            words = self.words_str(idx)
            img = self.images[idx]
            for r, i in enumerate(idx):
                row = [words[r], repr(float(self.displacements[i]))]
                for c in img[r]:
                    row += [repr(float(c.real)), repr(float(c.imag))]
                w.writerow(row)
        return fh.getvalue() if own else None


def _expand_chunk(cur_m, cur_letter, cur_run, base, letters, allowed_after, prune, dtype):
    nl = len(letters)
    k = cur_m.shape[0]
    last = cur_letter
    ok = np.ones((k, nl), dtype=bool)
    has_last = last >= 0
    if has_last.any():
        ok[has_last] = allowed_after[last[has_last]]
        for j, lt in enumerate(letters):
            if lt.max_run:
                same = has_last & (last == j) & (cur_run >= lt.max_run)
                ok[same, j] = False
    stacked = np.stack([lt.matrix for lt in letters]).astype(dtype)
    prod = _matmul(cur_m[:, None], stacked[None])  # (k, nl, d, d)
    par, let = np.nonzero(ok)
    m = canonical_phase(prod[par, let])
    disp = displacement_of(m)
    keep = disp <= prune
    par, let, m, disp = par[keep], let[keep], m[keep], disp[keep]
    run = np.where(cur_letter[par] == let, cur_run[par] + 1, 1)
    return m, base + par, let.astype(np.int16), run.astype(np.int16), disp


class _Deduper:
    def __init__(self, d: int, tol: float, dtype):
        rng = np.random.default_rng(_KEY_SEED)
        self.w_re = rng.standard_normal((d, d))
        self.w_im = rng.standard_normal((d, d)) if np.issubdtype(dtype, np.complexfloating) else None
        wsum = np.abs(self.w_re).sum() + (0 if self.w_im is None else np.abs(self.w_im).sum())
        self.key_tol = 4 * tol * wsum
        self.tol = tol

    def keys(self, m: np.ndarray) -> np.ndarray:
        k = np.einsum("nij,ij->n", m.real, self.w_re)
        if self.w_im is not None:
            k = k + np.einsum("nij,ij->n", m.imag, self.w_im)
        return k / np.abs(m[:, 0, 0])

    def fresh(self, old: list[np.ndarray], old_keys: list[np.ndarray], new_m, new_keys) -> np.ndarray:
        """Mask of new_m entries matching neither an old entry nor an earlier new one."""
        blocks = list(old) + [new_m]
        offsets = np.cumsum([0] + [b.shape[0] for b in blocks])
        keys = np.concatenate(list(old_keys) + [new_keys])
        n_old = int(offsets[-2])
        order = np.argsort(keys, kind="stable")
        ks = keys[order]
        dup = np.zeros(keys.shape[0], dtype=bool)

        def gather(i):
            out = np.empty((i.shape[0],) + new_m.shape[1:], dtype=new_m.dtype)
            blk = np.searchsorted(offsets, i, side="right") - 1
            for b, arr in enumerate(blocks):
                sel = blk == b
                out[sel] = arr[i[sel] - offsets[b]]
            return out

        for k in range(1, keys.shape[0]):
            close = np.nonzero(ks[k:] - ks[:-k] <= self.key_tol)[0]
            if close.size == 0:
                break
            for s in range(0, close.size, CHUNK):
                c = close[s:s + CHUNK]
                i1, i2 = order[c], order[c + k]
                m1, m2 = gather(i1), gather(i2)
                scale = np.maximum(np.abs(m1[:, 0, 0]), np.abs(m2[:, 0, 0]))
                diff = np.abs(m1 - m2).reshape(i1.shape[0], -1).max(axis=1)
                same = diff <= self.tol * np.maximum(scale, 1.0)
                dup[np.maximum(i1, i2)[same]] = True
        return ~dup[n_old:]


def enumerate_orbit(
    spec: GroupSpec,
    max_word_len: int,
    max_radius: float = np.inf,
    *,
    prune_margin: float | None = None,
    cap: int = DEFAULT_CAP,
    dedup_tol: float = 1e-7,
    workers: int = 1,
) -> OrbitSet:
    """Enumerate group elements of word length <= max_word_len and displacement <= max_radius.

    Words whose displacement exceeds ``max_radius + prune_margin`` are not
    expanded further; those within the margin are explored as stepping stones
    but not kept.  The default margin is the largest generator displacement.
    Pruning makes completeness at ``max_radius`` a heuristic.  If the search
    stops on word length or on the element cap, ``complete_radius`` is the
    smallest displacement among elements first reached in the last kept layer.
    """
    if max_word_len < 1:
        raise ValueError("max_word_len must be >= 1")
    if not max_radius > 0:
        raise ValueError("max_radius must be positive")
    letters = letters_for(spec)
    d = spec.ambient_dim + 1
    dtype = np.float64 if spec.is_real else np.complex128
    nl = len(letters)
    if prune_margin is None:
        prune_margin = max((float(displacement_of(lt.matrix)) for lt in letters), default=0.0)
    prune = max_radius + prune_margin
    allowed_after = np.ones((max(nl, 1), max(nl, 1)), dtype=bool)
    for i, lt in enumerate(letters):
        allowed_after[i, lt.inverse] = False
    dedup = _Deduper(d, dedup_tol, dtype)

    eye = np.eye(d, dtype=dtype)[None]
    bfs_parent = [np.array([-1], dtype=np.int64)]
    bfs_letter = [np.array([-1], dtype=np.int16)]
    # full fresh layers are stored once; ``layer_keep`` marks the kept rows
    layer_m, layer_keep = [eye], [np.ones(1, bool)]
    kept_disp, kept_depth, kept_node = [np.zeros(1)], [np.zeros(1, np.int32)], [np.zeros(1, np.int64)]
    n_kept, n_nodes = 1, 1
    prev_m, prev_k = eye[:0], np.zeros(0)
    cur_m, cur_k = eye, dedup.keys(eye)
    cur_node = np.zeros(1, np.int64)
    cur_letter = np.full(1, -1, np.int16)
    cur_run = np.zeros(1, np.int16)
    frontier_min: list[float] = [0.0]
    depth = 0
    stop_reason = "exhausted"
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while cur_m.shape[0] and nl:
            if depth == max_word_len:
                stop_reason = "word_len"
                break
            sizes = [k.shape[0] for k in kept_disp[-5:]]
            if len(sizes) >= 3 and min(sizes[:-1]) > 0:
                # layer sizes oscillate; take the worst recent ratio with some
                # slack so the layer that would overflow is never built
                growth = _CAP_SLACK * max(b / a for a, b in zip(sizes, sizes[1:]))
                if n_kept + sizes[-1] * growth > cap:
                    stop_reason = "cap"
                    break
            starts = range(0, cur_m.shape[0], CHUNK)
            args = [
                (cur_m[s:s + CHUNK], cur_letter[s:s + CHUNK], cur_run[s:s + CHUNK], s,
                 letters, allowed_after, prune, dtype)
                for s in starts
            ]
            parts = list(pool.map(lambda a: _expand_chunk(*a), args)) if pool else [_expand_chunk(*a) for a in args]
            del args
            c_m = np.concatenate([p[0] for p in parts])
            c_par = cur_node[np.concatenate([p[1] for p in parts])]
            c_let = np.concatenate([p[2] for p in parts])
            c_run = np.concatenate([p[3] for p in parts])
            c_disp = np.concatenate([p[4] for p in parts])
            del parts
            c_k = dedup.keys(c_m)
            fresh = dedup.fresh([prev_m, cur_m], [prev_k, cur_k], c_m, c_k)
            c_m = c_m[fresh]
            c_par, c_let, c_run, c_disp, c_k = c_par[fresh], c_let[fresh], c_run[fresh], c_disp[fresh], c_k[fresh]
            if c_m.shape[0] == 0:
                break
            keep = c_disp <= max_radius
            if n_kept + int(keep.sum()) > cap:
                stop_reason = "cap"
                break
            depth += 1
            frontier_min.append(float(c_disp.min()))
            nodes = n_nodes + np.arange(c_m.shape[0], dtype=np.int64)
            n_nodes += c_m.shape[0]
            bfs_parent.append(c_par)
            bfs_letter.append(c_let)
            layer_m.append(c_m)
            layer_keep.append(keep)
            kept_disp.append(c_disp[keep])
            kept_depth.append(np.full(int(keep.sum()), depth, np.int32))
            kept_node.append(nodes[keep])
            n_kept += int(keep.sum())
            prev_m, prev_k = cur_m, cur_k
            cur_m, cur_k, cur_node, cur_letter, cur_run = c_m, c_k, nodes, c_let, c_run
    finally:
        if pool:
            pool.shutdown()
    del prev_m, cur_m, prev_k, cur_k

    disp = np.concatenate(kept_disp)
    depths = np.concatenate(kept_depth)
    nodes = np.concatenate(kept_node)
    order = np.lexsort((nodes, depths, disp))
    rank = np.empty_like(order)
    rank[order] = np.arange(order.shape[0])
    matrices = np.empty((order.shape[0], d, d), dtype=dtype)
    pos = 0
    layer_m.reverse()
    layer_keep.reverse()
    while layer_m:
        blk, msk = layer_m.pop(), layer_keep.pop()
        cnt = int(msk.sum())
        matrices[rank[pos:pos + cnt]] = blk[msk]
        pos += cnt
        del blk
    complete = max_radius if stop_reason == "exhausted" else min(max_radius, frontier_min[-1])
    if not np.isfinite(complete):
        complete = float(disp.max())  # exhausted finite group with no radius bound
    orbit = OrbitSet(
        spec=spec, letters=letters, matrices=matrices,
        displacements=disp[order], depths=depths[order], node_ids=nodes[order],
        bfs_parent=np.concatenate(bfs_parent), bfs_letter=np.concatenate(bfs_letter),
        max_word_len=max_word_len, max_radius=float(max_radius),
        complete_radius=float(complete), dedup_tolerance=dedup_tol, frontier_min=frontier_min,
    )
    if stop_reason == "cap":
        raise OrbitCapExceeded(
            f"element cap {cap} would be exceeded at word length {depth + 1}; "
            f"partial orbit complete to radius {orbit.complete_radius:.4f}", orbit)
    return orbit


def _warn_beyond(orbit: OrbitSet, radius: float, what: str) -> bool:
    trusted = radius <= orbit.complete_radius + 1e-12
    if not trusted:
        warnings.warn(
            f"{what} at R={radius} exceeds complete_radius={orbit.complete_radius:.4f}",
            TruncationWarning, stacklevel=3)
    return trusted


def orbital_counting(orbit: OrbitSet, radius: float) -> int:
    """N(R) = #{gamma : d(0, gamma 0) <= R}, identity included."""
    _warn_beyond(orbit, radius, "orbital count")
    return int(np.searchsorted(orbit.displacements, radius, side="right"))


def counting_function(orbit: OrbitSet, radii) -> np.ndarray:
    return np.searchsorted(orbit.displacements, np.asarray(radii, dtype=float), side="right")


def min_displacement(orbit: OrbitSet, pred: CongruencePredicate | None = None) -> float:
    """Smallest displacement over nontrivial elements satisfying ``pred``."""
    mask = np.ones(len(orbit), dtype=bool)
    mask[0] = False  # identity sits first: displacement 0, empty word
    if pred is not None:
        mask &= orbit.kernel_mask(pred)
    if not mask.any():
        return float("inf")
    return float(orbit.displacements[mask].min())


CACHE_ENV = "KLEINBALL_CACHE"
_SAVED = ("matrices", "displacements", "depths", "node_ids", "bfs_parent", "bfs_letter")


def save_orbit(orbit: OrbitSet, path, partial: bool = False) -> None:
    meta = dict(
        spec=orbit.spec.to_json(), max_word_len=orbit.max_word_len, max_radius=orbit.max_radius,
        complete_radius=orbit.complete_radius, dedup_tolerance=orbit.dedup_tolerance,
        frontier_min=orbit.frontier_min, partial=partial,
    )
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta)), **{k: getattr(orbit, k) for k in _SAVED})


def load_orbit(path) -> tuple[OrbitSet, bool]:
    """Returns the orbit and whether it was a cap-limited partial result."""
    with np.load(path) as z:
        meta = json.loads(str(z["meta"]))
        arrays = {k: z[k] for k in _SAVED}
    spec = GroupSpec.from_json(meta["spec"])
    orbit = OrbitSet(
        spec=spec, letters=letters_for(spec), max_word_len=meta["max_word_len"],
        max_radius=meta["max_radius"], complete_radius=meta["complete_radius"],
        dedup_tolerance=meta["dedup_tolerance"], frontier_min=meta["frontier_min"], **arrays,
    )
    return orbit, bool(meta["partial"])


def cached_enumerate(spec: GroupSpec, max_word_len: int, max_radius: float = np.inf, **kw) -> OrbitSet:
    """enumerate_orbit, reusing a dump under $KLEINBALL_CACHE when present.

    ``workers`` is not part of the key since results do not depend on it.
    A cached partial result is re-raised as OrbitCapExceeded.
    """
    root = os.environ.get(CACHE_ENV)
    if not root:
        return enumerate_orbit(spec, max_word_len, max_radius, **kw)
    key_src = json.dumps(
        [spec.to_json(), max_word_len, repr(float(max_radius)),
         {k: v for k, v in sorted(kw.items()) if k != "workers"}], sort_keys=True)
    path = Path(root) / f"orbit-{hashlib.sha256(key_src.encode()).hexdigest()[:20]}.npz"
    if path.exists():
        orbit, partial = load_orbit(path)
        if partial:
            raise OrbitCapExceeded(f"cached partial orbit, complete to radius {orbit.complete_radius:.4f}", orbit)
        return orbit
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        orbit = enumerate_orbit(spec, max_word_len, max_radius, **kw)
    except OrbitCapExceeded as exc:
        save_orbit(exc.partial, path, partial=True)
        raise
    save_orbit(orbit, path)
    return orbit
