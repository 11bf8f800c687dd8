"""Double-centered Gramian, truncated eigendecomposition, and projections.

The geodesic distance matrix is converted to a Gramian with the classical
double-centering transform; by default the distances are squared first,
which makes the transform exactly reproduce the centered inner-product
matrix whenever the geodesics coincide with Euclidean distances. A literal
(unsquared) mode is kept behind a flag.

Two eigensolvers compute the leading eigenpairs: a dense LAPACK path
(mandatory at small orders and in tests) and a seeded Krylov iteration with
full reorthogonalization and thick restarts for large matrices. Their
agreement is part of the test suite, so neither may be removed without
replacing the cross-check.

Two projection routes turn a spectrum into denoised patches:

* :func:`smooth_patches` (pipeline default) treats each patch coordinate as
  a function on the graph vertices, projects it onto the span of the leading
  eigenvectors, and restores the mean patch. With the eigenvector budget L
  well below the vertex count this suppresses high-frequency content along
  the patch manifold, which is what actually removes noise.
* :func:`build_patch_basis` / :func:`project_patches` lift the eigenvectors
  through the patch matrix into an orthonormal basis of patch space and
  orthogonally project every patch onto its span. This is an idempotent,
  norm-nonincreasing projection, but its rank is capped by the patch
  dimension, so at full rank it reproduces the input exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

# Gramians up to this order are materialized; larger ones go matrix-free.
MATERIALIZE_MAX_ORDER = 16384

SOLVERS = ("dense", "iterative_krylov")

_BASIS_DROP_TOL = 1e-10


class EigensolverConvergenceError(RuntimeError):
    """Krylov iteration exhausted its budget before reaching tolerance."""

    def __init__(self, message: str, residuals: np.ndarray):
        self.residuals = np.asarray(residuals)
        super().__init__(f"{message}; residuals {np.array2string(self.residuals, precision=3)}")


@dataclass(frozen=True)
class GramianSpectrum:
    """Leading eigenpairs of the centered Gramian plus an optional patch basis."""

    eigenvalues: np.ndarray  # (L,) descending
    vertex_eigenvectors: np.ndarray = field(repr=False)  # (order, L), orthonormal columns
    patch_basis: np.ndarray | None = field(default=None, repr=False)  # (patch_dim, L_b)

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=np.float64)
        vecs = np.asarray(self.vertex_eigenvectors, dtype=np.float64)
        if vals.ndim != 1 or vecs.ndim != 2 or vecs.shape[1] != vals.shape[0]:
            raise ValueError(
                f"inconsistent spectrum shapes: values {vals.shape}, vectors {vecs.shape}"
            )
        if np.any(np.diff(vals) > 1e-9 * max(1.0, np.abs(vals).max())):
            raise ValueError("eigenvalues must be sorted in descending order")
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "vertex_eigenvectors", vecs)

    @property
    def count(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def order(self) -> int:
        return self.vertex_eigenvectors.shape[0]

    @property
    def basis_size(self) -> int:
        return 0 if self.patch_basis is None else self.patch_basis.shape[1]


def double_center(distances: np.ndarray, square_distances: bool = True) -> np.ndarray:
    """Gramian of a distance matrix: -1/2 * (M - row means - col means + grand mean).

    ``square_distances`` selects M = D*D (default, the classical-MDS form) or
    the literal M = D. Output is exactly symmetric with vanishing row and
    column means.
    """
    d = np.asarray(distances)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {d.shape}")
    m = np.asarray(d, dtype=np.float64)
    m = m * m if square_distances else m.copy()
    row_means = m.mean(axis=1)
    col_means = m.mean(axis=0)
    grand = m.mean()
    m -= row_means[:, None]
    m -= col_means[None, :]
    m += grand
    m *= -0.5
    return 0.5 * (m + m.T)


class CenteredGramianOperator:
    """Matrix-free centered Gramian for distance matrices too large to double."""

    def __init__(self, distances: np.ndarray, square_distances: bool = True):
        d = np.asarray(distances)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {d.shape}")
        self._dist = d
        self._square = square_distances
        n = d.shape[0]
        self.shape = (n, n)
        # row means of M in float64, accumulated blockwise
        sums = np.zeros(n)
        for lo in range(0, n, 1024):
            blk = np.asarray(d[lo : lo + 1024], dtype=np.float64)
            if square_distances:
                blk = blk * blk
            sums[lo : lo + blk.shape[0]] = blk.sum(axis=1)
        self._row_means = sums / n
        self._grand_mean = float(sums.sum()) / (n * n)

    def matmat(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[:, None]
        n = self.shape[0]
        mx = np.empty((n, x.shape[1]))
        for lo in range(0, n, 1024):
            blk = np.asarray(self._dist[lo : lo + 1024], dtype=np.float64)
            if self._square:
                blk = blk * blk
            mx[lo : lo + blk.shape[0]] = blk @ x
        col_sums = x.sum(axis=0)  # (k,)
        rm_dot = self._row_means @ x  # (k,)
        out = mx
        out -= np.outer(self._row_means, col_sums)
        out -= np.tile(rm_dot, (n, 1))  # symmetric D: column means equal row means
        out += self._grand_mean * np.tile(col_sums, (n, 1))
        out *= -0.5
        return out[:, 0] if single else out

    matvec = matmat


def _apply(G, x: np.ndarray) -> np.ndarray:
    if isinstance(G, np.ndarray):
        return G @ x
    return G.matmat(x)


def top_eigenpairs(
    G,
    count: int,
    solver: str = "dense",
    tol: float = 1e-8,
    seed: int = 0,
    max_matvecs: int | None = None,
) -> GramianSpectrum:
    """Algebraically largest ``count`` eigenpairs of a symmetric matrix.

    ``G`` is a dense symmetric ndarray or a matrix-free operator exposing
    ``shape`` and ``matmat`` (operators require the Krylov solver).
    Eigenvalues come back descending with orthonormal eigenvectors.
    """
    order = G.shape[0]
    if G.shape[0] != G.shape[1]:
        raise ValueError(f"matrix must be square, got shape {G.shape}")
    if not 1 <= count <= order:
        raise ValueError(f"eigenpair count must satisfy 1 <= count <= {order}, got {count}")
    if solver == "dense":
        if not isinstance(G, np.ndarray):
            raise ValueError("dense solver needs a materialized matrix")
        vals, vecs = scipy.linalg.eigh(G, subset_by_index=[order - count, order - 1])
        return GramianSpectrum(vals[::-1].copy(), vecs[:, ::-1].copy())
    if solver in ("iterative_krylov", "krylov"):
        vals, vecs = _krylov_top(G, order, count, tol, seed, max_matvecs)
        return GramianSpectrum(vals, vecs)
    raise ValueError(f"unknown solver {solver!r} (want one of {SOLVERS})")


def _krylov_top(G, order: int, count: int, tol: float, seed: int, max_matvecs: int | None):
    """Thick-restart Lanczos with full reorthogonalization, seeded and deterministic."""
    rng = np.random.default_rng(seed)
    cap = min(order, max(3 * count + 20, 60))
    retain = min(cap - 1, count + max(10, count // 2))
    budget = max_matvecs or int(np.ceil(10.0 * count * np.sqrt(order))) + cap
    check_every = max(1, count // 10)

    Q = np.zeros((order, cap))
    AQ = np.zeros((order, cap))
    m = 0
    matvecs = 0
    norm_est = 0.0
    next_dir = rng.standard_normal(order)
    last_resid = np.full(count, np.inf)

    def ritz(k: int):
        H = Q[:, :m].T @ AQ[:, :m]
        H = 0.5 * (H + H.T)
        theta, S = np.linalg.eigh(H)
        theta, S = theta[::-1], S[:, ::-1]
        X = Q[:, :m] @ S[:, :k]
        AX = AQ[:, :m] @ S[:, :k]
        resid = np.linalg.norm(AX - X * theta[:k], axis=0)
        return theta, S, X, resid

    while True:
        v = next_dir.copy()
        for _ in range(2):  # full reorthogonalization, twice for stability
            v -= Q[:, :m] @ (Q[:, :m].T @ v)
        nv = np.linalg.norm(v)
        if nv < 1e-12:  # invariant subspace hit; inject a fresh direction
            v = rng.standard_normal(order)
            for _ in range(2):
                v -= Q[:, :m] @ (Q[:, :m].T @ v)
            nv = np.linalg.norm(v)
            if nv < 1e-12:
                break  # basis spans the whole reachable space
        v /= nv
        Q[:, m] = v
        av = _apply(G, v)
        matvecs += 1
        AQ[:, m] = av
        m += 1
        next_dir = av

        if m >= count and (m % check_every == 0 or m in (cap, order)):
            theta, S, X, resid = ritz(count)
            last_resid = resid
            norm_est = max(norm_est, float(np.abs(theta).max(initial=0.0)))
            scale = max(norm_est, np.finfo(np.float64).tiny)
            if np.all(resid <= tol * scale):
                return theta[:count].copy(), X

            if m == order:  # Rayleigh-Ritz over the full space is exact
                return theta[:count].copy(), X

            if m == cap:  # thick restart: keep the best Ritz directions
                # the continuation vector must be orthogonal to the FULL basis
                # being discarded, or the dropped directions re-enter and the
                # iteration stagnates
                for _ in range(2):
                    next_dir = next_dir - Q[:, :m] @ (Q[:, :m].T @ next_dir)
                new_q, _ = np.linalg.qr(Q[:, :m] @ S[:, :retain])
                Q[:, :retain] = new_q
                AQ[:, :retain] = _apply(G, new_q)
                matvecs += retain
                m = retain

        if matvecs >= budget:
            raise EigensolverConvergenceError(
                f"no convergence after {matvecs} matrix products "
                f"(tolerance {tol:g}, order {order}, count {count})",
                last_resid,
            )

    # exhausted the reachable space with m < count requested vectors; pad is
    # impossible, so report what converged
    theta, S, X, resid = ritz(min(count, m))
    if np.all(resid <= tol * max(norm_est, np.finfo(np.float64).tiny)) and m >= count:
        return theta[:count].copy(), X
    raise EigensolverConvergenceError(
        f"Krylov space exhausted at dimension {m} < {count}", resid
    )


def build_patch_basis(patches, spectrum: GramianSpectrum) -> GramianSpectrum:
    """Lift vertex eigenvectors into an orthonormal basis of patch space.

    Candidate l is the patch matrix applied to eigenvector l; candidates are
    orthonormalized in eigenvalue order with stabilized sequential
    orthogonalization, dropping any with residual norm below 1e-10. If every
    candidate degenerates (constant image), the basis falls back to the
    normalized constant patch direction.
    """
    P = np.asarray(getattr(patches, "patches", patches), dtype=np.float64)
    if P.shape[0] != spectrum.order:
        raise ValueError(
            f"spectrum order {spectrum.order} does not match patch count {P.shape[0]}"
        )
    candidates = P.T @ spectrum.vertex_eigenvectors  # (patch_dim, L)
    kept: list[np.ndarray] = []
    for l in range(candidates.shape[1]):
        v = candidates[:, l].copy()
        for _ in range(2):
            for b in kept:
                v -= (b @ v) * b
        norm = np.linalg.norm(v)
        if norm >= _BASIS_DROP_TOL:
            kept.append(v / norm)
    if not kept:
        constant = np.ones(P.shape[1])
        kept = [constant / np.linalg.norm(constant)]
    basis = np.column_stack(kept)
    return replace(spectrum, patch_basis=basis)


def project_patches(patches, spectrum: GramianSpectrum):
    """Orthogonally project every patch onto the span of the patch basis.

    Idempotent, and never increases a patch's norm. Requires
    :func:`build_patch_basis` to have run on the spectrum.
    """
    if spectrum.patch_basis is None:
        raise ValueError("spectrum has no patch basis; run build_patch_basis first")
    P = patches.patches
    B = spectrum.patch_basis
    if P.shape[1] != B.shape[0]:
        raise ValueError(
            f"patch dimension {P.shape[1]} does not match basis dimension {B.shape[0]}"
        )
    return patches.with_patches((P @ B) @ B.T)


def smooth_patches(patches, spectrum: GramianSpectrum):
    """Filter the patch set through the leading Gramian eigenvectors.

    Each patch coordinate, viewed as a function over the graph vertices, is
    projected onto the span of the retained eigenvectors; the mean patch is
    removed first and restored afterwards, since the centered Gramian's
    eigenvectors are orthogonal to the constant function and would otherwise
    strip the brightness level. Modes beyond the retained ones carry the
    high-frequency (noise) content, so truncation denoises.
    """
    P = patches.patches
    if P.shape[0] != spectrum.order:
        raise ValueError(
            f"spectrum order {spectrum.order} does not match patch count {P.shape[0]}"
        )
    V = spectrum.vertex_eigenvectors
    mean = P.mean(axis=0)
    centered = P - mean
    return patches.with_patches(mean + V @ (V.T @ centered))
