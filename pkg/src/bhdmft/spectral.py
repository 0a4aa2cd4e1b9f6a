"""Steady state and single-particle response from the sectored Lindbladian.

The workflow is: diagonalize the k=0 block (or solve its kernel directly) for
the steady state, diagonalize k=+1 (and optionally k=-1), then evaluate the
retarded and Keldysh impurity functions as sums over simple poles,

    G^R(w) = S1(w) - S2(w)*,      G^K(w) = 2i Im S1(w) - 2i Im S2(w),

    S1(w) = sum_a <I|a|r_a><l_a|a†|rho_ss> / (w - i L_a)    (sector k=-1),
    S2(w) = sum_a <I|a†|r_a><l_a|a|rho_ss> / (w + i L_a)    (sector k=+1).

Because the generator preserves Hermiticity, the k=-1 block equals the
complex conjugate of the k=+1 block after swapping the (row, col) pair
labels, so S1 can be evaluated from the k=+1 eigensystem alone; both routes
are implemented and must agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .fock import CompositeBasis, site_annihilator
from .lindblad import AimModel, SectoredSuperoperator, model_basis, vectorize_lindbladian

__all__ = [
    "Eigensystem",
    "SteadyState",
    "KeldyshGF",
    "Observables",
    "ImpuritySolution",
    "DefectiveBlockError",
    "SteadyStateError",
    "NoSteadyStateError",
    "DegenerateSteadyStateError",
    "eigendecompose",
    "steady_state",
    "steady_state_kernel",
    "impurity_greens",
    "spectral_functions",
    "local_observables",
    "solve_impurity",
]


class DefectiveBlockError(RuntimeError):
    """Right eigenvectors too ill-conditioned to define a two-sided eigensystem."""


class SteadyStateError(RuntimeError):
    """Kernel extraction failed."""


class NoSteadyStateError(SteadyStateError):
    pass


class DegenerateSteadyStateError(SteadyStateError):
    pass


@dataclass
class Eigensystem:
    """Two-sided eigendecomposition, block = right @ diag(values) @ left.

    ``right`` holds right eigenvectors as columns, ``left`` the bi-orthonormal
    left eigenvectors as rows (``left @ right == I`` by construction).
    """

    values: np.ndarray
    right: np.ndarray
    left: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def reconstruction_residual(self, block: np.ndarray) -> float:
        """Relative Frobenius residual of right @ diag(values) @ left against block."""
        approx = (self.right * self.values[None, :]) @ self.left
        return float(np.linalg.norm(approx - block) / max(np.linalg.norm(block), 1e-300))


def eigendecompose(block: np.ndarray, *, cond_limit: float = 3e13) -> Eigensystem:
    """Full dense eigendecomposition of one sector block.

    Left eigenvectors are obtained by inverting the right-eigenvector matrix,
    which enforces bi-orthonormality exactly even inside near-degenerate
    clusters.  A defective block surfaces as an (estimated) condition number
    of the eigenvector matrix beyond ``cond_limit``.
    """
    values, right = np.linalg.eig(block)
    try:
        left = np.linalg.inv(right)
    except np.linalg.LinAlgError as exc:
        raise DefectiveBlockError(f"eigenvector matrix is singular: {exc}") from exc
    cond = float(
        np.abs(right).sum(axis=0).max() * np.abs(left).sum(axis=0).max()
    )
    if cond > cond_limit:
        raise DefectiveBlockError(
            f"eigenvector matrix condition estimate {cond:.3e} exceeds {cond_limit:.1e}"
        )
    return Eigensystem(values=values, right=right, left=left)


@dataclass
class SteadyState:
    """Trace-normalized stationary density matrix.

    Attributes
    ----------
    vector : ndarray
        Coefficients on the k=0 pair list, normalized to unit trace.
    rho : ndarray, shape (dim, dim)
        The density matrix, symmetrized after a Hermiticity check.
    gap : float or None
        Decay rate of the slowest nonstationary k=0 mode (only available on
        the eigendecomposition route).
    hermiticity_defect : float
        Largest element of ``rho - rho†`` before symmetrization.
    """

    vector: np.ndarray
    rho: np.ndarray
    gap: float | None
    hermiticity_defect: float


def _finalize_steady(
    vector: np.ndarray,
    pairs: tuple[np.ndarray, np.ndarray],
    dim: int,
    gap: float | None,
) -> SteadyState:
    rows, cols = pairs
    trace = vector[rows == cols].sum()
    if abs(trace) < 1e-12 * np.linalg.norm(vector):
        raise SteadyStateError("candidate kernel vector has (numerically) zero trace")
    vector = vector / trace
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[rows, cols] = vector
    defect = float(np.abs(rho - rho.conj().T).max())
    if defect > 1e-6:
        raise SteadyStateError(f"steady state is not Hermitian (defect {defect:.3e})")
    rho = 0.5 * (rho + rho.conj().T)
    return SteadyState(vector=vector, rho=rho, gap=gap, hermiticity_defect=defect)


def steady_state(
    eigs: Eigensystem,
    pairs: tuple[np.ndarray, np.ndarray],
    dim: int,
    *,
    block_norm: float | None = None,
    tol_factor: float = 1e-7,
) -> SteadyState:
    """Steady state from the k=0 eigendecomposition.

    Kernel eigenvalues are those with ``|L_a| <= tol_factor * scale`` where the
    scale is the block norm (max-row-sum) if supplied, else the spectral
    radius.  Exactly one is required.
    """
    scale = block_norm if block_norm is not None else float(np.abs(eigs.values).max())
    if scale == 0.0:
        raise NoSteadyStateError("zero generator has no distinguished steady state")
    tol = tol_factor * scale
    kernel = np.nonzero(np.abs(eigs.values) <= tol)[0]
    if kernel.size == 0:
        raise NoSteadyStateError(
            f"no eigenvalue below {tol:.3e}; smallest is {np.abs(eigs.values).min():.3e}"
        )
    if kernel.size > 1:
        raise DegenerateSteadyStateError(
            f"{kernel.size} eigenvalues below {tol:.3e}; steady-state manifold is degenerate"
        )
    rest = np.delete(np.arange(eigs.dim), kernel[0])
    gap = float(-eigs.values[rest].real.max()) if rest.size else None
    return _finalize_steady(eigs.right[:, kernel[0]].copy(), pairs, dim, gap)


def steady_state_kernel(
    block: np.ndarray,
    pairs: tuple[np.ndarray, np.ndarray],
    dim: int,
    *,
    residual_factor: float = 1e-15,
) -> SteadyState:
    """Steady state by shifted LU inverse iteration on the k=0 block.

    Roughly an order of magnitude cheaper than the full eigendecomposition
    (O(n^3/3) versus ~25 n^3) and exact to solver precision for a unique
    kernel.  Degeneracy is probed with a second iteration from an independent
    start vector; on any irregularity a SteadyStateError is raised so callers
    can fall back to the eigendecomposition route.
    """
    m = block.shape[0]
    norm = float(np.abs(block).sum(axis=1).max())
    if norm == 0.0:
        raise NoSteadyStateError("zero generator has no distinguished steady state")
    shifted = block - (1e-12 * norm) * np.eye(m, dtype=block.dtype)
    lu = lu_factor(shifted, check_finite=False)

    rows, cols = pairs
    x = (rows == cols).astype(np.complex128)
    nx0 = np.linalg.norm(x)
    if nx0 == 0.0:
        raise NoSteadyStateError("sector has no diagonal pairs, so no stationary trace")
    x /= nx0
    residual = np.inf
    for _ in range(10):
        x = lu_solve(lu, x, check_finite=False)
        nx = np.linalg.norm(x)
        if not np.isfinite(nx) or nx == 0.0:
            raise SteadyStateError("inverse iteration produced a non-finite vector")
        x /= nx
        residual = float(np.linalg.norm(block @ x))
        if residual <= residual_factor * norm:
            break
    else:
        raise SteadyStateError(
            f"inverse iteration stalled at residual {residual:.3e} (norm {norm:.3e})"
        )

    probe_rng = np.random.default_rng(0x5EED)
    y = probe_rng.standard_normal(m) + 1j * probe_rng.standard_normal(m)
    y /= np.linalg.norm(y)
    for _ in range(2):
        y = lu_solve(lu, y, check_finite=False)
        y /= np.linalg.norm(y)
    overlap = abs(np.vdot(x, y))
    if overlap < 1.0 - 1e-8:
        raise DegenerateSteadyStateError(
            f"kernel probe overlap {overlap:.12f} < 1; steady state looks degenerate"
        )
    return _finalize_steady(x, pairs, dim, None)


def _require_same_grid(a: "KeldyshGF", b: "KeldyshGF") -> None:
    if not np.array_equal(a.grid, b.grid):
        raise ValueError("frequency grids differ")


@dataclass
class KeldyshGF:
    """Retarded and Keldysh components sampled on a common real-frequency grid."""

    grid: np.ndarray
    retarded: np.ndarray
    keldysh: np.ndarray

    def __post_init__(self) -> None:
        self.grid = np.asarray(self.grid, dtype=np.float64)
        self.retarded = np.asarray(self.retarded, dtype=np.complex128)
        self.keldysh = np.asarray(self.keldysh, dtype=np.complex128)
        if not (self.grid.shape == self.retarded.shape == self.keldysh.shape):
            raise ValueError("grid and components must have identical shapes")

    @classmethod
    def zeros(cls, grid: np.ndarray) -> "KeldyshGF":
        grid = np.asarray(grid, dtype=np.float64)
        z = np.zeros_like(grid, dtype=np.complex128)
        return cls(grid=grid, retarded=z.copy(), keldysh=z.copy())

    @property
    def advanced(self) -> np.ndarray:
        return self.retarded.conj()

    def __add__(self, other: "KeldyshGF") -> "KeldyshGF":
        _require_same_grid(self, other)
        return KeldyshGF(
            grid=self.grid,
            retarded=self.retarded + other.retarded,
            keldysh=self.keldysh + other.keldysh,
        )

    def __sub__(self, other: "KeldyshGF") -> "KeldyshGF":
        return self + (-1.0) * other

    def __mul__(self, c: float) -> "KeldyshGF":
        return KeldyshGF(grid=self.grid, retarded=c * self.retarded, keldysh=c * self.keldysh)

    __rmul__ = __mul__


def spectral_functions(gf: KeldyshGF) -> tuple[np.ndarray, np.ndarray]:
    """Local spectral function A = -Im G^R / pi and correlation C = -G^K / 2pi i.

    Both are real; C's vanishing real part (G^K is purely imaginary by
    construction) is dropped.
    """
    A = -gf.retarded.imag / np.pi
    C = (-gf.keldysh / (2j * np.pi)).real
    return A, C


def _pole_sum(weights: np.ndarray, poles: np.ndarray, grid: np.ndarray, chunk: int = 512) -> np.ndarray:
    """sum_a weights[a] / (grid - poles[a]) evaluated in grid chunks."""
    out = np.empty(grid.shape, dtype=np.complex128)
    for start in range(0, grid.size, chunk):
        sl = slice(start, min(start + chunk, grid.size))
        out[sl] = (weights[None, :] / (grid[sl, None] - poles[None, :])).sum(axis=1)
    return out


def impurity_greens(
    sup: SectoredSuperoperator,
    eigs: Mapping[int, Eigensystem],
    steady: SteadyState,
    grid: np.ndarray,
) -> KeldyshGF:
    """Impurity G^R and G^K from the sector eigensystems and the steady state.

    ``eigs`` must contain the k=+1 eigensystem.  If k=-1 is present it is used
    directly; otherwise the k=-1 sum is reconstructed from k=+1 through the
    Hermiticity-preservation symmetry of the generator (conjugate block under
    pair swap), which costs two extra weight contractions instead of a second
    O(n^3) diagonalization.
    """
    if 1 not in eigs or eigs[1] is None:
        raise ValueError("the k=+1 eigensystem is required")
    grid = np.asarray(grid, dtype=np.float64)
    basis = sup.basis
    a = site_annihilator(basis, 0)
    adag = a.conj().T
    rho = steady.rho

    ep = eigs[1]
    rows_p, cols_p = sup.pairs(1)
    u2 = adag[cols_p, rows_p]
    v2 = (a @ rho)[rows_p, cols_p]
    w2 = (u2 @ ep.right) * (ep.left @ v2)
    # S2 poles sit at w = -i L_a, i.e. 1/(w + i L_a)
    S2 = _pole_sum(w2, -1j * ep.values, grid)

    em = eigs.get(-1)
    if em is not None:
        rows_m, cols_m = sup.pairs(-1)
        u1 = a[cols_m, rows_m]
        v1 = (adag @ rho)[rows_m, cols_m]
        w1 = (u1 @ em.right) * (em.left @ v1)
        S1 = _pole_sum(w1, 1j * em.values, grid)
    else:
        u1t = a.conj()[rows_p, cols_p]
        v1t = (adag @ rho).conj()[cols_p, rows_p]
        w1t = (u1t @ ep.right) * (ep.left @ v1t)
        S1 = _pole_sum(w1t, -1j * ep.values, grid).conj()

    retarded = S1 - S2.conj()
    keldysh = 2j * (S1.imag - S2.imag)
    return KeldyshGF(grid=grid, retarded=retarded, keldysh=keldysh)


@dataclass
class Observables:
    """Static steady-state observables of the impurity-plus-bath cluster.

    ``site_occupations[i][n]`` is the probability of occupation n on site i
    (site 0 is the impurity); ``mean_occupations[i]`` its first moment;
    ``n_loc`` is the impurity mean occupation.
    """

    n_loc: float
    site_occupations: tuple[np.ndarray, ...]
    mean_occupations: np.ndarray


def local_observables(basis: CompositeBasis, rho: np.ndarray) -> Observables:
    """Site-resolved occupation statistics from the diagonal of rho."""
    diag = np.real(np.diag(rho))
    probs: list[np.ndarray] = []
    means = np.empty(basis.n_sites)
    for i, site in enumerate(basis.sites):
        p = np.bincount(basis.occupations[:, i], weights=diag, minlength=site.dim)
        probs.append(p)
        means[i] = float(np.arange(site.dim) @ p)
    return Observables(
        n_loc=float(means[0]),
        site_occupations=tuple(probs),
        mean_occupations=means,
    )


@dataclass
class ImpuritySolution:
    """Bundle returned by ``solve_impurity``."""

    model: AimModel
    gf: KeldyshGF
    observables: Observables
    steady: SteadyState
    jittered: bool = False


def solve_impurity(
    model: AimModel,
    grid: np.ndarray,
    *,
    k0_method: str = "kernel",
    derive_minus: bool = True,
    max_block_dim: int | None = None,
) -> ImpuritySolution:
    """Exact-diagonalization solve of one impurity model on a frequency grid.

    Parameters
    ----------
    k0_method : {"kernel", "eig"}
        How to extract the steady state: LU inverse iteration (fast path,
        falls back to "eig" on any irregularity) or full eigendecomposition.
    derive_minus : bool
        Reconstruct the k=-1 spectral sum from the k=+1 eigensystem instead
        of diagonalizing the k=-1 block.

    Notes
    -----
    If an eigendecomposition is flagged defective, the solve is retried once
    on a copy of the model with site energies jittered by 1e-9 relative.
    """
    if k0_method not in ("kernel", "eig"):
        raise ValueError(f"unknown k0_method {k0_method!r}")

    def attempt(mod: AimModel) -> tuple[KeldyshGF, Observables, SteadyState]:
        ks = (0, 1) if derive_minus else (0, 1, -1)
        sup = vectorize_lindbladian(mod, ks=ks, max_block_dim=max_block_dim)
        block0 = sup.blocks[0]
        pairs0 = sup.pairs(0)
        dim = sup.basis.dim
        if k0_method == "kernel":
            try:
                steady = steady_state_kernel(block0, pairs0, dim)
            except SteadyStateError:
                steady = steady_state(
                    eigendecompose(block0), pairs0, dim,
                    block_norm=float(np.abs(block0).sum(axis=1).max()),
                )
        else:
            steady = steady_state(
                eigendecompose(block0), pairs0, dim,
                block_norm=float(np.abs(block0).sum(axis=1).max()),
            )
        sup.blocks.pop(0)  # free ~m0^2 complex before the k=+1 eigendecomposition
        eigs: dict[int, Eigensystem] = {1: eigendecompose(sup.blocks[1])}
        if not derive_minus:
            eigs[-1] = eigendecompose(sup.blocks[-1])
        gf = impurity_greens(sup, eigs, steady, grid)
        obs = local_observables(sup.basis, steady.rho)
        return gf, obs, steady

    try:
        gf, obs, steady = attempt(model)
        return ImpuritySolution(model=model, gf=gf, observables=obs, steady=steady)
    except DefectiveBlockError:
        jit = model.jittered()
        gf, obs, steady = attempt(jit)
        return ImpuritySolution(model=jit, gf=gf, observables=obs, steady=steady, jittered=True)
