"""Independent reference constructions used across the test modules.

Everything here is deliberately built by a different route than the package:
the full vectorized generator comes from np.kron applied term by term to the
master equation, sector membership from an explicit double loop, and the
single-mode observables from closed-form rate-equation results.
"""

from __future__ import annotations

import numpy as np

from bhdmft import AimModel, BathSite
from bhdmft.lindblad import build_hamiltonian, jump_channels, model_basis


def full_lindbladian(model: AimModel) -> tuple[np.ndarray, np.ndarray]:
    """Dense dim^2 x dim^2 generator for vec(rho)[r*D + c] = rho[r, c].

    Row-major flattening turns A rho B into kron(A, B.T); the master equation

        drho/dt = -i[H, rho] + sum_ch 2 g (L rho L† - {L†L, rho}/2)

    is assembled literally from that rule.  Returns (generator, total), where
    total[s] is the particle number of composite basis state s.
    """
    basis = model_basis(model)
    D = basis.dim
    eye = np.eye(D)
    H = build_hamiltonian(model, basis)
    gen = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for _, rate, L in jump_channels(model, basis):
        LdL = L.conj().T @ L
        gen += 2.0 * rate * np.kron(L, L.conj())
        gen -= rate * (np.kron(LdL, eye) + np.kron(eye, LdL.T))
    return gen, basis.total


def sector_flat_indices(total: np.ndarray, k: int) -> np.ndarray:
    """Flat vec indices of sector k, in the package's (row-major pair) order."""
    D = total.size
    idx = [r * D + c for r in range(D) for c in range(D) if total[c] - total[r] == k]
    return np.asarray(idx, dtype=np.intp)


def gather_sector(full: np.ndarray, total: np.ndarray, k: int) -> np.ndarray:
    """Sector block of the full generator, for comparison with build_sector."""
    idx = sector_flat_indices(total, k)
    return full[np.ix_(idx, idx)]


def random_small_model(rng: np.random.Generator, max_cutoff: int = 4) -> AimModel:
    """Random dissipative model, small enough for dense-kron cross checks."""
    n_bath = int(rng.integers(0, 3))
    cutoffs = tuple(int(c) for c in rng.integers(1, max_cutoff + 1, size=1 + n_bath))
    bath = tuple(
        BathSite(
            omega=float(rng.uniform(-2.0, 2.0)),
            nu=float(rng.uniform(0.0, 1.0)),
            Gamma1=float(rng.uniform(0.0, 1.0)),
            P1=float(rng.uniform(0.0, 0.5)),
        )
        for _ in range(n_bath)
    )
    model = AimModel(
        omega0=float(rng.uniform(-1.0, 3.0)),
        U=float(rng.uniform(0.0, 2.0)),
        P1=float(rng.uniform(0.0, 0.5)),
        Gamma2=float(rng.uniform(0.0, 1.0)),
        Gamma1=float(rng.uniform(0.0, 1.0)),
        bath=bath,
        cutoffs=cutoffs,
    )
    # at least one channel must survive truncation; retry is simpler than care
    if model.P1 == 0 and model.Gamma1 == 0 and not bath:
        return random_small_model(rng, max_cutoff)
    return model


def single_mode_greens(grid, omega0, gamma, pump):
    """Closed-form G^R, G^K of one pumped lossy harmonic mode (gamma > pump)."""
    gr = 1.0 / (grid - omega0 + 1j * (gamma - pump))
    gk = -2j * (gamma + pump) / ((grid - omega0) ** 2 + (gamma - pump) ** 2)
    return gr, gk
