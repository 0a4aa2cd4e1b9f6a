"""Lindblad generator of a dissipative bosonic impurity model, in sectored form.

The model is a single interacting mode (the impurity) linearly coupled to a
set of auxiliary modes (the bath), with Markovian pump and loss channels:

    H = w0 a†a + U (a†a)^2 + sum_n [ w_n b_n†b_n + nu_n (b_n†a + a†b_n) ]

    D[rho] = 2 P1 D_{a†} + 2 Gamma2 D_{aa} + 2 Gamma1 D_{a}
             + sum_n ( 2 Gamma1nn D_{b_n} + 2 P1nn D_{b_n†} )

with D_L[rho] = L rho L† - {L†L, rho}/2.  All rates use the "2 gamma"
convention above: a mode with loss Gamma and pump P relaxes its occupation at
rate 2(Gamma - P).

Vectorization doubles the Fock space, |rho> = sum_nm rho_nm |n> (x) |m~>, and
maps superoperators to (X (x) Y)-type matrices via vec(A rho B) = (A (x) B^T).
The full generator then reads

    L = X (x) 1 + 1 (x) X*  +  sum_ch 2 gamma_ch ( L_ch (x) L_ch* ),
    X = -iH - sum_ch gamma_ch L_ch† L_ch .

The coefficient 2 on the sandwich term (and 1 on the others) is fixed by
trace preservation, <I| L = 0 with <I| = sum_n <n| (x) <n~|.

The superoperator K = i(N~ - N) commutes with L, so L is block diagonal in
the sector label k = (tilde occupation) - (original occupation).  Blocks are
assembled directly from the occupation-pair lists of each sector; the full
dim^2 x dim^2 matrix is never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .fock import CompositeBasis, SiteSpec, build_composite_basis, site_annihilator

__all__ = [
    "BathSite",
    "AimModel",
    "SectoredSuperoperator",
    "model_basis",
    "build_hamiltonian",
    "jump_channels",
    "sector_pairs",
    "build_sector",
    "vectorize_lindbladian",
]


@dataclass(frozen=True)
class BathSite:
    """One auxiliary mode: energy, real coupling to the impurity, loss and pump rates."""

    omega: float
    nu: float
    Gamma1: float
    P1: float

    def __post_init__(self) -> None:
        if self.Gamma1 < 0 or self.P1 < 0:
            raise ValueError(f"bath rates must be >= 0, got Gamma1={self.Gamma1}, P1={self.P1}")


@dataclass(frozen=True)
class AimModel:
    """Dissipative Anderson-style impurity model.

    Parameters
    ----------
    omega0, U : float
        Impurity frequency and two-body interaction; local levels are
        ``omega0*n + U*n**2``.
    P1 : float
        Impurity single-particle pump rate.
    Gamma2 : float
        Impurity two-particle loss rate (jump operator ``a a``).
    bath : tuple of BathSite
    cutoffs : tuple of int
        Occupation cutoffs, impurity first, then one per bath site.
    Gamma1 : float, optional
        Impurity single-particle loss rate.  Zero in the lattice problem; a
        nonzero value turns the isolated impurity into the exactly solvable
        pumped-lossy mode used to calibrate the solver.
    """

    omega0: float
    U: float
    P1: float
    Gamma2: float
    bath: tuple[BathSite, ...]
    cutoffs: tuple[int, ...]
    Gamma1: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "bath", tuple(self.bath))
        object.__setattr__(self, "cutoffs", tuple(int(c) for c in self.cutoffs))
        if len(self.cutoffs) != 1 + len(self.bath):
            raise ValueError(
                f"need one cutoff per site: got {len(self.cutoffs)} for {1 + len(self.bath)} sites"
            )
        for name in ("P1", "Gamma2", "Gamma1"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def n_sites(self) -> int:
        return 1 + len(self.bath)

    def jittered(self, scale: float = 1e-9) -> "AimModel":
        """Copy with site energies perturbed by a relative amount (degeneracy breaker)."""
        bath = tuple(
            replace(site, omega=site.omega * (1.0 + scale * (i + 1)))
            for i, site in enumerate(self.bath)
        )
        return replace(self, omega0=self.omega0 * (1.0 + scale), bath=bath)


def model_basis(model: AimModel) -> CompositeBasis:
    """Composite Fock basis of the impurity (site 0) and bath sites in order."""
    sites = [SiteSpec("imp", model.cutoffs[0])]
    sites += [SiteSpec(f"bath{n + 1}", c) for n, c in enumerate(model.cutoffs[1:])]
    return build_composite_basis(sites)


def build_hamiltonian(model: AimModel, basis: CompositeBasis | None = None) -> np.ndarray:
    """Dense Hamiltonian matrix on the composite basis."""
    if basis is None:
        basis = model_basis(model)
    occ = basis.occupations
    n0 = occ[:, 0].astype(np.float64)
    diag = model.omega0 * n0 + model.U * n0**2
    for n, site in enumerate(model.bath):
        diag = diag + site.omega * occ[:, n + 1]
    H = np.diag(diag.astype(np.complex128))
    a = site_annihilator(basis, 0)
    for n, site in enumerate(model.bath):
        if site.nu == 0.0:
            continue
        b = site_annihilator(basis, n + 1)
        hop = site.nu * (b.conj().T @ a)
        H += hop + hop.conj().T
    return H


def jump_channels(
    model: AimModel, basis: CompositeBasis | None = None
) -> list[tuple[str, float, np.ndarray]]:
    """All jump channels with positive rate, as (label, rate, operator) triples.

    Rates are the bare model rates; the dissipator prefactor 2 is applied
    during assembly.  Channels whose operator vanishes identically on the
    truncated space (e.g. ``a a`` with impurity cutoff 1) are still listed so
    the model's intent stays visible to diagnostics.
    """
    if basis is None:
        basis = model_basis(model)
    a = site_annihilator(basis, 0)
    channels: list[tuple[str, float, np.ndarray]] = []
    if model.P1 > 0:
        channels.append(("pump", model.P1, a.conj().T))
    if model.Gamma2 > 0:
        channels.append(("two_particle_loss", model.Gamma2, a @ a))
    if model.Gamma1 > 0:
        channels.append(("loss", model.Gamma1, a))
    for n, site in enumerate(model.bath):
        b = site_annihilator(basis, n + 1)
        if site.Gamma1 > 0:
            channels.append((f"bath{n + 1}_loss", site.Gamma1, b))
        if site.P1 > 0:
            channels.append((f"bath{n + 1}_pump", site.P1, b.conj().T))
    return channels


def sector_pairs(basis: CompositeBasis, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Occupation pairs (row, col) of sector k, ordered lexicographically.

    A pair (r, c) stands for the density-matrix element rho[r, c]; the sector
    label is k = total(c) - total(r).
    """
    N = basis.total
    mask = (N[None, :] - N[:, None]) == k
    rows, cols = np.nonzero(mask)
    return rows, cols


@dataclass
class SectoredSuperoperator:
    """Block-diagonal vectorized Lindbladian, one dense block per built sector."""

    basis: CompositeBasis
    blocks: dict[int, np.ndarray]
    _pairs: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False)

    @property
    def sectors(self) -> tuple[int, ...]:
        return tuple(sorted(self.blocks))

    def pairs(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        if k not in self._pairs:
            self._pairs[k] = sector_pairs(self.basis, k)
        return self._pairs[k]

    def block(self, k: int) -> np.ndarray:
        try:
            return self.blocks[k]
        except KeyError:
            raise KeyError(f"sector {k} was not built (available: {self.sectors})") from None

    def left_vacuum(self, k: int = 0) -> np.ndarray:
        """Trace functional <I| restricted to a sector: 1 on diagonal pairs, 0 elsewhere."""
        rows, cols = self.pairs(k)
        return (rows == cols).astype(np.complex128)

    def trace_defect(self) -> float:
        """|<I| L_0|_2 / |L_0|_F, which vanishes for a trace-preserving generator."""
        block = self.block(0)
        lhs = self.left_vacuum(0) @ block
        return float(np.linalg.norm(lhs) / np.linalg.norm(block))


def build_sector(
    model: AimModel,
    basis: CompositeBasis,
    k: int,
    *,
    hamiltonian: np.ndarray | None = None,
    channels: Sequence[tuple[str, float, np.ndarray]] | None = None,
) -> np.ndarray:
    """Dense block of the vectorized Lindbladian on one sector.

    Element (i, j) couples pair (r_i, c_i) to (r_j, c_j):

        block[i, j] = X[r_i, r_j] d(c_i, c_j) + d(r_i, r_j) X*[c_i, c_j]
                      + sum_ch 2 gamma_ch L[r_i, r_j] L*[c_i, c_j]

    with X = -iH - sum_ch gamma_ch L†L.
    """
    if hamiltonian is None:
        hamiltonian = build_hamiltonian(model, basis)
    if channels is None:
        channels = jump_channels(model, basis)
    X = -1j * hamiltonian
    for _, rate, L in channels:
        X -= rate * (L.conj().T @ L)
    rows, cols = sector_pairs(basis, k)
    same_col = cols[:, None] == cols[None, :]
    same_row = rows[:, None] == rows[None, :]
    block = X[np.ix_(rows, rows)] * same_col
    block += same_row * X.conj()[np.ix_(cols, cols)]
    for _, rate, L in channels:
        Lc = L.conj()
        block += (2.0 * rate) * (L[np.ix_(rows, rows)] * Lc[np.ix_(cols, cols)])
    return block


def vectorize_lindbladian(
    model: AimModel,
    *,
    ks: Iterable[int] = (0, 1, -1),
    basis: CompositeBasis | None = None,
    require_dissipation: bool = True,
    max_block_dim: int | None = None,
) -> SectoredSuperoperator:
    """Assemble the requested sectors of the vectorized Lindbladian.

    Parameters
    ----------
    ks : iterable of int
        Sector labels to build.  The steady state lives in k=0; the
        single-particle response needs k=+1 and k=-1.
    require_dissipation : bool
        Reject models with no active jump channel (such a generator has no
        relaxation and no unique steady state).  Disable to study the
        dissipation-free spectrum, which is -i times the Hamiltonian gaps.
    max_block_dim : int, optional
        Guard against runaway memory use: refuse blocks larger than this.

    Raises
    ------
    ValueError
        If no channel with positive rate survives truncation while
        ``require_dissipation`` is set, or a block exceeds ``max_block_dim``.
    """
    if basis is None:
        basis = model_basis(model)
    H = build_hamiltonian(model, basis)
    channels = jump_channels(model, basis)
    active = [(lbl, rate, L) for lbl, rate, L in channels if np.any(L != 0)]
    if require_dissipation and not active:
        raise ValueError("model has no dissipation channel with positive rate")
    sup = SectoredSuperoperator(basis=basis, blocks={})
    for k in ks:
        rows, cols = sector_pairs(basis, k)
        if max_block_dim is not None and len(rows) > max_block_dim:
            raise ValueError(
                f"sector {k} has dimension {len(rows)} > max_block_dim={max_block_dim}"
            )
        sup._pairs[k] = (rows, cols)
        sup.blocks[k] = build_sector(model, basis, k, hamiltonian=H, channels=active)
    return sup
