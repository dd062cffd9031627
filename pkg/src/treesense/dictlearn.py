"""Orthonormal dictionary learning with tree-structured sparse coefficients.

Alternating minimization of

    sum_i 0.5*||x_i - D a_i||^2 + lam * Omega(a_i),   s.t.  D^T D = I,

where Omega is the hierarchical group penalty over node-plus-descendants
groups.  With orthonormal D the coding step is an exact proximal step, and
the dictionary step is an orthogonal Procrustes problem.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np

from .tree import TreeTopology, GroupSet, groups_of, make_tree

__all__ = [
    "Dictionary",
    "TrainingSet",
    "LearnConfig",
    "depth_weights",
    "tree_group_penalty",
    "tree_prox",
    "sparse_code",
    "update_dictionary",
    "learn",
    "learn_objective",
    "save_dictionary",
    "load_dictionary",
]

logger = logging.getLogger(__name__)

ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class Dictionary:
    """n x p matrix of orthonormal atoms, atom i attached to tree node i."""

    atoms: np.ndarray
    tree: TreeTopology

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        object.__setattr__(self, "atoms", atoms)
        n, p = atoms.shape
        if p != self.tree.p:
            raise ValueError(f"atom count {p} does not match tree with p={self.tree.p}")
        if p > n:
            raise ValueError("orthonormal columns require p <= n")
        gram_err = np.max(np.abs(atoms.T @ atoms - np.eye(p)))
        if gram_err > ORTHO_TOL:
            raise ValueError(f"columns not orthonormal (max Gram deviation {gram_err:.2e})")


@dataclass(frozen=True)
class TrainingSet:
    """Centered n x q training matrix plus the removed column mean."""

    data: np.ndarray
    mean: np.ndarray

    @classmethod
    def from_raw(cls, X):
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=1)
        return cls(data=X - mean[:, None], mean=mean)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def q(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class LearnConfig:
    lam: float
    group_norm: str = "l2"
    outer_iters: int = 30
    inner_iters: int = 5
    tol: float = 1e-6

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.group_norm not in ("l2", "linf"):
            raise ValueError("group_norm must be 'l2' or 'linf'")
        if self.outer_iters < 1 or self.inner_iters < 1:
            raise ValueError("iteration counts must be >= 1")


def depth_weights(tree, rho):
    """Depth-decaying group weights w_g = rho^depth(g), aligned with groups_of order."""
    order = sorted(range(1, tree.p + 1), key=lambda i: (-tree.node_depth(i), i))
    return np.array([rho ** tree.node_depth(i) for i in order])


def tree_group_penalty(a, groups, norm="l2"):
    """Hierarchical penalty: sum over groups of weight * norm(a restricted to g)."""
    a = np.asarray(a, dtype=float)
    ord_ = np.inf if norm == "linf" else 2
    total = 0.0
    for g, w in zip(groups.groups, groups.weights):
        idx = np.fromiter((i - 1 for i in g), dtype=int)
        total += w * np.linalg.norm(a[idx], ord=ord_)
    return total


def _check_deepest_first(groups):
    """Each group's non-root members must be roots of earlier groups."""
    seen = set()
    for g, r in zip(groups.groups, groups.roots):
        for i in g:
            if i != r and i not in seen:
                raise ValueError("group list is not ordered deepest-first")
        seen.add(r)


def _project_l1_ball(v, radius):
    """Euclidean projection of v onto the l1 ball of the given radius."""
    if radius <= 0:
        return np.zeros_like(v)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(u) + 1) > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def tree_prox(v, groups, threshold, norm="l2"):
    """Exact prox of threshold * Omega at v for laminar (tree) groups.

    Applies the single-group prox operators in deepest-to-root order: group
    soft-thresholding for the l2 norm, residual after l1-ball projection for
    the l-infinity norm.  Accepts a vector or a (p, q) matrix of columns.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    _check_deepest_first(groups)
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    U = v[:, None].copy() if single else v.copy()
    if threshold > 0:
        for g, w in zip(groups.groups, groups.weights):
            t = threshold * w
            if t == 0:
                continue
            idx = np.fromiter((i - 1 for i in g), dtype=int)
            block = U[idx, :]
            if norm == "l2":
                norms = np.linalg.norm(block, axis=0)
                scale = np.where(norms > t, 1.0 - t / np.where(norms > 0, norms, 1.0), 0.0)
                U[idx, :] = block * scale
            elif norm == "linf":
                for c in range(U.shape[1]):
                    U[idx, c] = block[:, c] - _project_l1_ball(block[:, c], t)
            else:
                raise ValueError("norm must be 'l2' or 'linf'")
    return U[:, 0] if single else U


def _code_objective(X, C, A, groups, lam, norm, x_sq):
    # 0.5||X - DA||^2 = 0.5||C - A||^2 + 0.5(||X||^2 - ||C||^2) for orthonormal D
    resid = 0.5 * np.sum((C - A) ** 2, axis=0) + x_sq
    pen = np.array([tree_group_penalty(A[:, i], groups, norm) for i in range(A.shape[1])])
    return resid + lam * pen


def sparse_code(training, dictionary, groups, cfg):
    """Code every training column against the dictionary.

    Monotone accelerated proximal gradient with unit step (valid because the
    orthonormal dictionary makes the smooth part 1-Lipschitz); under
    orthonormality the iteration lands on the exact minimizer immediately,
    and the per-column objective is nonincreasing across iterations.
    """
    X = training.data if isinstance(training, TrainingSet) else np.asarray(training, dtype=float)
    D = dictionary.atoms
    gram_err = np.max(np.abs(D.T @ D - np.eye(D.shape[1])))
    if gram_err > ORTHO_TOL:
        raise ValueError("sparse_code requires an orthonormal dictionary")
    C = D.T @ X
    x_sq = 0.5 * (np.sum(X**2, axis=0) - np.sum(C**2, axis=0))

    A = np.zeros_like(C)
    Z = A.copy()
    obj = _code_objective(X, C, A, groups, cfg.lam, cfg.group_norm, x_sq)
    t_mom = 1.0
    for _ in range(cfg.inner_iters):
        # gradient of the smooth part at Z is (Z - C); unit step lands at C
        cand = tree_prox(C, groups, cfg.lam, cfg.group_norm)
        cand_obj = _code_objective(X, C, cand, groups, cfg.lam, cfg.group_norm, x_sq)
        better = cand_obj <= obj
        A_new = np.where(better, cand, A)
        obj_new = np.where(better, cand_obj, obj)
        t_next = (1 + np.sqrt(1 + 4 * t_mom**2)) / 2
        Z = A_new + (t_mom / t_next) * (cand - A_new) + ((t_mom - 1) / t_next) * (A_new - A)
        rel = np.max(np.abs(obj_new - obj)) / max(np.max(np.abs(obj)), 1e-30)
        A, obj, t_mom = A_new, obj_new, t_next
        if rel < cfg.tol:
            break
    return A


def update_dictionary(training, A):
    """Orthogonal Procrustes dictionary step: argmin ||X - DA||_F s.t. D^T D = I.

    Solved via the reduced SVD of X A^T.  Rank deficiency is completed
    deterministically by the SVD's remaining singular vectors (logged).
    """
    X = training.data if isinstance(training, TrainingSet) else np.asarray(training, dtype=float)
    A = np.asarray(A, dtype=float)
    M = X @ A.T
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s[0] == 0 or s[-1] < 1e-12 * s[0]:
        logger.info("X A^T is rank-deficient; null directions completed deterministically")
    return U @ Vt


def learn_objective(X, D, A, groups, lam, norm="l2"):
    """Value of the learning objective at (D, A)."""
    resid = 0.5 * np.sum((X - D @ A) ** 2)
    pen = sum(tree_group_penalty(A[:, i], groups, norm) for i in range(A.shape[1]))
    return resid + lam * pen


def _init_atoms(training, p, rng):
    """Orthonormalize p randomly chosen centered training columns (with
    Gaussian fill-in when the selection is rank deficient)."""
    X = training.data
    n, q = X.shape
    cols = rng.permutation(q)[:p]
    B = X[:, cols].copy()
    if B.shape[1] < p:
        B = np.hstack([B, rng.standard_normal((n, p - B.shape[1]))])
    # Gaussian perturbation guards against duplicate/zero training columns
    B = B + 1e-8 * np.linalg.norm(B, ord="fro") / np.sqrt(B.size) * rng.standard_normal(B.shape)
    Q, R = np.linalg.qr(B)
    Q = Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))
    if np.max(np.abs(Q.T @ Q - np.eye(p))) > ORTHO_TOL:
        Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    return Q


def learn(training, tree, cfg, rng, init=None, weights=None):
    """Alternating minimization for the tree-structured orthonormal dictionary.

    Returns (Dictionary, A, history) where history holds the objective after
    each alternation; the sequence is nonincreasing.
    """
    X = training.data
    n, q = X.shape
    if tree.p > n:
        raise ValueError("p > n: orthonormal dictionary impossible")
    if q < 1:
        raise ValueError("empty training set")
    groups = groups_of(tree, weights)
    D = _init_atoms(training, tree.p, rng) if init is None else np.asarray(init, dtype=float)

    history = []
    A = np.zeros((tree.p, q))
    for _ in range(cfg.outer_iters):
        A = sparse_code(training, Dictionary(atoms=D, tree=tree), groups, cfg)
        obj = learn_objective(X, D, A, groups, cfg.lam, cfg.group_norm)
        history.append(obj)
        if len(history) >= 2:
            prev = history[-2]
            if abs(prev - obj) < cfg.tol * max(abs(prev), 1.0):
                break
        D = update_dictionary(training, A)
    return Dictionary(atoms=D, tree=tree), A, history


# ---------------------------------------------------------------------------
# Binary container: magic "LASR", version u16, n/p/d/L u32 (all little
# endian), column mean as n f64, atoms column-major as n*p f64.
# ---------------------------------------------------------------------------

_MAGIC = b"LASR"
_VERSION = 1


def save_dictionary(path, dictionary, mean=None):
    """Persist a dictionary (and optional column mean) to the binary container."""
    atoms = dictionary.atoms
    n, p = atoms.shape
    tree = dictionary.tree
    mean = np.zeros(n) if mean is None else np.asarray(mean, dtype=float)
    if mean.shape != (n,):
        raise ValueError("mean length must match atom dimension")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<HIIII", _VERSION, n, p, tree.d, tree.depth))
        f.write(mean.astype("<f8").tobytes())
        f.write(np.asfortranarray(atoms).astype("<f8").tobytes(order="F"))


def load_dictionary(path):
    """Load (Dictionary, mean) from the binary container."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        version, n, p, d, L = struct.unpack("<HIIII", f.read(18))
        if version != _VERSION:
            raise ValueError(f"unsupported container version {version}")
        mean = np.frombuffer(f.read(8 * n), dtype="<f8").copy()
        raw = np.frombuffer(f.read(8 * n * p), dtype="<f8")
        atoms = raw.reshape((n, p), order="F").copy()
    tree = make_tree(d, L)
    if tree.p != p:
        raise ValueError("container p inconsistent with (d, L)")
    return Dictionary(atoms=atoms, tree=tree), mean
