"""Lorentzian bath parametrization of hybridization functions, and its fit.

A bath of N discrete damped modes produces the hybridization

    Delta^R(w) = sum_n nu_n^2 / (w - w_n + i(Gamma_n - P_n)),
    Delta^K(w) = -2i sum_n nu_n^2 (Gamma_n + P_n) / ((w - w_n)^2 + (Gamma_n - P_n)^2),

one complex Lorentzian per site with half-width Gamma_n - P_n.  Fitting a
target hybridization means minimizing the chi distance

    chi = sum_{c in {R,K}} int dw W_c(w) |Delta_c - T_c|^n        (default n=2)

over (w_n, nu_n, Gamma_n, P_n) with box constraints.  Internally the fit uses
the stability parametrization w_n = Gamma_n - P_n >= eps_stab so gradient
steps cannot produce a gain-dominated (upper-half-plane) pole.  Gradients are
closed-form; the optimizer is L-BFGS-B with a handful of jittered restarts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .lindblad import BathSite
from .spectral import KeldyshGF

__all__ = [
    "BathParams",
    "FitReport",
    "eval_hybridization",
    "chi_distance",
    "fit_bath",
]

EPS_STAB = 1e-6


@dataclass(frozen=True)
class BathParams:
    """Arrays of bath-site parameters (energies, couplings, loss and pump rates)."""

    omega: np.ndarray
    nu: np.ndarray
    Gamma1: np.ndarray
    P1: np.ndarray

    def __post_init__(self) -> None:
        for name in ("omega", "nu", "Gamma1", "P1"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=np.float64))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.omega.shape[0]
        if not all(getattr(self, f).shape == (n,) for f in ("nu", "Gamma1", "P1")):
            raise ValueError("parameter arrays must share one length")
        if np.any(self.Gamma1 < 0) or np.any(self.P1 < 0):
            raise ValueError("rates must be >= 0")

    @property
    def n_sites(self) -> int:
        return self.omega.shape[0]

    @property
    def width(self) -> np.ndarray:
        """Retarded half-widths Gamma1 - P1."""
        return self.Gamma1 - self.P1

    def sorted(self) -> "BathParams":
        """Copy with sites ordered by increasing energy and couplings made non-negative."""
        order = np.argsort(self.omega, kind="stable")
        return BathParams(
            omega=self.omega[order],
            nu=np.abs(self.nu[order]),
            Gamma1=self.Gamma1[order],
            P1=self.P1[order],
        )

    def to_sites(self) -> tuple[BathSite, ...]:
        return tuple(
            BathSite(omega=float(w), nu=float(v), Gamma1=float(g), P1=float(p))
            for w, v, g, p in zip(self.omega, self.nu, self.Gamma1, self.P1)
        )

    @classmethod
    def from_sites(cls, sites) -> "BathParams":
        sites = tuple(sites)
        return cls(
            omega=np.array([s.omega for s in sites]),
            nu=np.array([s.nu for s in sites]),
            Gamma1=np.array([s.Gamma1 for s in sites]),
            P1=np.array([s.P1 for s in sites]),
        )


@dataclass
class FitReport:
    """Outcome of one fit_bath call (best restart)."""

    chi: float
    grad_norm: float
    n_iterations: int
    restarts: int
    success: bool
    status: str
    restart_chis: tuple[float, ...]


def eval_hybridization(params: BathParams, grid: np.ndarray) -> KeldyshGF:
    """Retarded and Keldysh hybridization of a discrete damped bath."""
    grid = np.asarray(grid, dtype=np.float64)
    d = grid[:, None] - params.omega[None, :] + 1j * params.width[None, :]
    nu2 = params.nu**2
    retarded = (nu2[None, :] / d).sum(axis=1)
    keldysh = -2j * (
        nu2[None, :] * (params.Gamma1 + params.P1)[None, :] / (d * d.conj()).real
    ).sum(axis=1)
    return KeldyshGF(grid=grid, retarded=retarded, keldysh=keldysh)


def _quad_weights(grid: np.ndarray) -> np.ndarray:
    """Trapezoidal quadrature weights for an arbitrary strictly increasing grid."""
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be 1-D with at least two points")
    h = np.diff(grid)
    if np.any(h <= 0):
        raise ValueError("grid must be strictly increasing")
    w = np.zeros_like(grid)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def _component_weights(weights, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    wr, wk = weights
    wr = np.broadcast_to(np.asarray(wr, dtype=np.float64), grid.shape)
    wk = np.broadcast_to(np.asarray(wk, dtype=np.float64), grid.shape)
    if np.any(wr < 0) or np.any(wk < 0):
        raise ValueError("component weights must be >= 0")
    return wr, wk


def chi_distance(
    a: KeldyshGF,
    b: KeldyshGF,
    *,
    exponent: float = 2.0,
    weights=(1.0, 1.0),
) -> float:
    """Weighted L^n distance between two hybridizations over both components."""
    if not np.array_equal(a.grid, b.grid):
        raise ValueError("frequency grids differ")
    if exponent < 1:
        raise ValueError(f"exponent must be >= 1, got {exponent}")
    wr, wk = _component_weights(weights, a.grid)
    q = _quad_weights(a.grid)
    dr = np.abs(a.retarded - b.retarded)
    dk = np.abs(a.keldysh - b.keldysh)
    return float((q * wr * dr**exponent).sum() + (q * wk * dk**exponent).sum())


def _pack(params: BathParams) -> np.ndarray:
    return np.concatenate([params.omega, params.nu, params.width, params.P1])


def _unpack(x: np.ndarray, n: int) -> BathParams:
    omega, nu, w, p = x[:n], x[n : 2 * n], x[2 * n : 3 * n], x[3 * n :]
    return BathParams(omega=omega, nu=nu, Gamma1=w + p, P1=p)


def _chi_and_grad(
    x: np.ndarray,
    n: int,
    target_r: np.ndarray,
    target_k: np.ndarray,
    grid: np.ndarray,
    q: np.ndarray,
    wr: np.ndarray,
    wk: np.ndarray,
    exponent: float,
) -> tuple[float, np.ndarray]:
    """chi and its gradient in the packed (omega, nu, width, pump) coordinates."""
    omega, nu, w, p = x[:n], x[n : 2 * n], x[2 * n : 3 * n], x[3 * n :]
    d = grid[:, None] - omega[None, :] + 1j * w[None, :]
    g = 1.0 / d
    absg2 = (g * g.conj()).real
    nu2 = nu**2
    strength = w + 2.0 * p  # Gamma + P in the stability coordinates

    delta_r = (nu2[None, :] * g).sum(axis=1) - target_r
    delta_k = (-2j * nu2 * strength)[None, :] * absg2
    delta_k = delta_k.sum(axis=1) - target_k

    ar = np.abs(delta_r)
    ak = np.abs(delta_k)
    chi = float((q * wr * ar**exponent).sum() + (q * wk * ak**exponent).sum())

    # d chi = sum q W n |D|^(n-2) Re(conj(D) dDelta); guard 0^negative at exponent 2
    if exponent == 2.0:
        fr = 2.0 * q * wr
        fk = 2.0 * q * wk
    else:
        fr = exponent * q * wr * np.maximum(ar, 1e-300) ** (exponent - 2.0)
        fk = exponent * q * wk * np.maximum(ak, 1e-300) ** (exponent - 2.0)
    cr = (fr * delta_r.conj())[:, None]
    ck = (fk * delta_k.conj())[:, None]

    g2 = g * g
    dr_domega = nu2[None, :] * g2
    dr_dnu = 2.0 * nu[None, :] * g
    dr_dw = -1j * nu2[None, :] * g2
    grad_r = np.array(
        [
            (cr * dr_domega).real.sum(axis=0),
            (cr * dr_dnu).real.sum(axis=0),
            (cr * dr_dw).real.sum(axis=0),
            np.zeros(n),
        ]
    )

    absg4 = absg2 * absg2
    x_off = (grid[:, None] - omega[None, :])
    dk_domega = (-4j * nu2 * strength)[None, :] * x_off * absg4
    dk_dnu = (-4j * nu * strength)[None, :] * absg2
    dk_dw = (-2j * nu2)[None, :] * absg2 + (4j * nu2 * strength * 1.0)[None, :] * (
        w[None, :] * absg4
    )
    dk_dp = (-4j * nu2)[None, :] * absg2
    grad_k = np.array(
        [
            (ck * dk_domega).real.sum(axis=0),
            (ck * dk_dnu).real.sum(axis=0),
            (ck * dk_dw).real.sum(axis=0),
            (ck * dk_dp).real.sum(axis=0),
        ]
    )
    return chi, (grad_r + grad_k).reshape(-1)


def _default_init(target: KeldyshGF, n_sites: int) -> BathParams:
    """Heuristic starting point: sites spread over the grid, couplings from the
    retarded spectral weight, moderate widths."""
    grid = target.grid
    span = grid[-1] - grid[0]
    omega = grid[0] + span * (np.arange(1, n_sites + 1) / (n_sites + 1))
    q = _quad_weights(grid)
    total = float((q * (-target.retarded.imag / np.pi)).sum())
    nu = np.full(n_sites, np.sqrt(max(total, 1e-6) / n_sites))
    w = np.full(n_sites, span / 20.0)
    p = w / 10.0
    return BathParams(omega=omega, nu=nu, Gamma1=w + p, P1=p)


def fit_bath(
    target: KeldyshGF,
    *,
    n_sites: int | None = None,
    init: BathParams | None = None,
    restarts: int = 4,
    jitter: float = 0.2,
    rng: np.random.Generator | None = None,
    exponent: float = 2.0,
    weights=(1.0, 1.0),
    eps_stab: float = EPS_STAB,
    maxiter: int = 1000,
) -> tuple[BathParams, FitReport]:
    """Fit a discrete damped bath to a target hybridization.

    The first start is the unjittered ``init`` (or a heuristic guess); the
    remaining ``restarts - 1`` starts jitter all parameters by the relative
    amount ``jitter``.  The best final chi wins.  Returned sites are sorted by
    energy with non-negative couplings.

    Raises
    ------
    ValueError
        If neither ``n_sites`` nor ``init`` determines the bath size, or the
        exponent is below 2 (the gradient of |.|^n is singular there).
    """
    if exponent < 2:
        raise ValueError("fit_bath requires exponent >= 2 for a smooth objective")
    if init is None:
        if n_sites is None:
            raise ValueError("pass n_sites or an initial BathParams")
        init = _default_init(target, n_sites)
    elif n_sites is not None and init.n_sites != n_sites:
        raise ValueError(f"init has {init.n_sites} sites, expected {n_sites}")
    n = init.n_sites
    if rng is None:
        rng = np.random.default_rng(0)

    grid = target.grid
    q = _quad_weights(grid)
    wr, wk = _component_weights(weights, grid)
    span = grid[-1] - grid[0]
    bounds = (
        [(grid[0] - 0.5 * span, grid[-1] + 0.5 * span)] * n
        + [(0.0, None)] * n
        + [(eps_stab, None)] * n
        + [(0.0, None)] * n
    )

    x0 = _pack(init)
    x0[2 * n : 3 * n] = np.maximum(x0[2 * n : 3 * n], eps_stab)
    starts = [x0]
    for _ in range(max(restarts, 1) - 1):
        x = x0 * (1.0 + jitter * rng.uniform(-1.0, 1.0, size=x0.shape))
        x[:n] = x0[:n] + jitter * span * 0.25 * rng.uniform(-1.0, 1.0, size=n)
        starts.append(np.clip(x, [b[0] if b[0] is not None else -np.inf for b in bounds],
                              [b[1] if b[1] is not None else np.inf for b in bounds]))

    args = (n, target.retarded, target.keldysh, grid, q, wr, wk, float(exponent))
    best = None
    chis: list[float] = []
    for x_start in starts:
        res = minimize(
            _chi_and_grad,
            x_start,
            args=args,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": maxiter, "maxfun": 4 * maxiter, "ftol": 1e-15, "gtol": 1e-12},
        )
        chis.append(float(res.fun))
        if best is None or res.fun < best.fun:
            best = res
    assert best is not None

    params = _unpack(best.x, n).sorted()
    report = FitReport(
        chi=float(best.fun),
        grad_norm=float(np.abs(best.jac).max()) if best.jac is not None else np.nan,
        n_iterations=int(best.nit),
        restarts=len(starts),
        success=bool(best.success),
        status=str(best.message),
        restart_chis=tuple(chis),
    )
    return params, report
