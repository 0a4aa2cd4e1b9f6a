"""File artifacts of runs and sweeps: CSV tables, JSON observables, manifests.

All floating-point values are written with 17 significant digits so reruns of
identical inputs are byte-identical; timestamps live only in manifests.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .bath import BathParams
from .dmft import DmftSolution, HistoryEntry
from .spectral import KeldyshGF, spectral_functions
from .zeno import SweepResult

__all__ = [
    "write_greens_csv",
    "write_history_csv",
    "write_observables_json",
    "write_bath_json",
    "write_aggregate_csv",
    "write_manifest",
    "write_run_artifacts",
]

FMT = "%.17g"


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(FMT % v for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def write_greens_csv(path: Path, gf: KeldyshGF) -> None:
    """Impurity functions per frequency: G^R, Im G^K, and the derived A and C."""
    A, C = spectral_functions(gf)
    _write_csv(
        path,
        ["omega", "re_GR", "im_GR", "im_GK", "A_loc", "C_loc"],
        zip(gf.grid, gf.retarded.real, gf.retarded.imag, gf.keldysh.imag, A, C),
    )


def write_history_csv(path: Path, history: Sequence[HistoryEntry]) -> None:
    _write_csv(
        path,
        ["iteration", "chi_fit", "delta_change", "n_loc"],
        ((h.iteration, h.chi_fit, h.delta_change, h.n_loc) for h in history),
    )


def _bath_dict(bath: BathParams) -> dict:
    b = bath.sorted()
    return {
        "omega": b.omega.tolist(),
        "nu": b.nu.tolist(),
        "Gamma1": b.Gamma1.tolist(),
        "P1": b.P1.tolist(),
        "gamma1_eff": b.width.tolist(),
    }


def write_bath_json(path: Path, bath: BathParams) -> None:
    path.write_text(json.dumps(_bath_dict(bath), indent=2, sort_keys=True) + "\n")


def write_observables_json(path: Path, solution: DmftSolution) -> None:
    obs = solution.observables
    payload = {
        "gamma2": solution.gamma2,
        "converged": solution.converged,
        "n_iterations": solution.n_iterations,
        "n_loc": obs.n_loc,
        "mean_occupations": obs.mean_occupations.tolist(),
        "site_occupations": [p.tolist() for p in obs.site_occupations],
        "impurity_weight_01": float(obs.site_occupations[0][: 2].sum()),
        "bath": _bath_dict(solution.bath),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_aggregate_csv(path: Path, sweep: SweepResult) -> None:
    """One row per sweep point; Fock-weight columns follow the impurity cutoff."""
    n_fock = sweep.impurity_weights.shape[1]
    header = ["gamma2_over_U", "n_loc", "n_loc_normalized", "gamma1_eff_1"]
    header += [f"fock_{n}" for n in range(n_fock)]
    header += ["converged"]
    rows = []
    for i in range(sweep.gamma2.size):
        row = [
            sweep.gamma2_over_U[i],
            sweep.n_loc[i],
            sweep.n_loc_normalized[i],
            sweep.gamma1_eff_first[i],
            *sweep.impurity_weights[i],
            float(sweep.converged[i]),
        ]
        rows.append(row)
    _write_csv(path, header, rows)


def write_manifest(
    directory: Path,
    *,
    command: str,
    config: dict,
    seed: int,
    started_at: datetime,
    outputs: Sequence[str],
) -> None:
    payload = {
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": config,
        "started_at": started_at.isoformat(),
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "outputs": sorted(outputs),
    }
    (directory / "manifest.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_run_artifacts(
    directory: Path,
    solution: DmftSolution,
    *,
    command: str,
    config: dict,
    seed: int,
    started_at: datetime,
) -> list[str]:
    """Write the full artifact set of one DMFT run and its manifest."""
    directory.mkdir(parents=True, exist_ok=True)
    write_greens_csv(directory / "greens.csv", solution.gf)
    write_history_csv(directory / "history.csv", solution.history)
    write_observables_json(directory / "observables.json", solution)
    write_bath_json(directory / "bath_params.json", solution.bath)
    outputs = ["greens.csv", "history.csv", "observables.json", "bath_params.json"]
    write_manifest(
        directory,
        command=command,
        config=config,
        seed=seed,
        started_at=started_at,
        outputs=outputs + ["manifest.json"],
    )
    return outputs
