"""Batch front end: TOML config in, CSV/JSON artifacts out.

Two subcommands:

    bhdmft run   --config cfg.toml --out rundir [--seed N] [--plots]
    bhdmft sweep --config cfg.toml --out sweepdir [--jobs N] [--seed N] [--plots]

Exit codes: 0 success, 2 unusable configuration (the offending field is
named), 3 finished but unconverged (artifacts are still written).  Log
verbosity is controlled by the BHDMFT_LOG environment variable
(DEBUG/INFO/WARNING/ERROR; default WARNING).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .dmft import DmftConfig, dmft_loop
from .output import write_aggregate_csv, write_manifest, write_run_artifacts
from .zeno import sweep_zeno

log = logging.getLogger(__name__)


class ConfigError(Exception):
    """Configuration problem; ``field`` is the dotted path of the bad entry."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class _Section:
    def __init__(self, raw: dict, prefix: str) -> None:
        if not isinstance(raw, dict):
            raise ConfigError(prefix or "<root>", "must be a table")
        self.raw = raw
        self.prefix = prefix

    def _path(self, key: str) -> str:
        return f"{self.prefix}.{key}" if self.prefix else key

    def section(self, key: str, required: bool = True) -> "_Section | None":
        if key not in self.raw:
            if required:
                raise ConfigError(self._path(key), "missing required table")
            return None
        return _Section(self.raw[key], self._path(key))

    def number(self, key: str, default=None, *, minimum=None, exclusive=False):
        if key not in self.raw:
            if default is None:
                raise ConfigError(self._path(key), "missing required number")
            return default
        v = self.raw[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(self._path(key), f"must be a number, got {v!r}")
        v = float(v)
        if minimum is not None and (v <= minimum if exclusive else v < minimum):
            op = ">" if exclusive else ">="
            raise ConfigError(self._path(key), f"must be {op} {minimum}, got {v:g}")
        return v

    def integer(self, key: str, default=None, *, minimum=None):
        if key not in self.raw:
            if default is None:
                raise ConfigError(self._path(key), "missing required integer")
            return default
        v = self.raw[key]
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(self._path(key), f"must be an integer, got {v!r}")
        if minimum is not None and v < minimum:
            raise ConfigError(self._path(key), f"must be >= {minimum}, got {v}")
        return v

    def boolean(self, key: str, default: bool) -> bool:
        v = self.raw.get(key, default)
        if not isinstance(v, bool):
            raise ConfigError(self._path(key), f"must be true or false, got {v!r}")
        return v

    def number_list(self, key: str, *, required: bool = True) -> list[float] | None:
        if key not in self.raw:
            if required:
                raise ConfigError(self._path(key), "missing required list")
            return None
        v = self.raw[key]
        if not isinstance(v, list) or not v:
            raise ConfigError(self._path(key), "must be a non-empty list")
        out = []
        for i, item in enumerate(v):
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigError(f"{self._path(key)}[{i}]", f"must be a number, got {item!r}")
            out.append(float(item))
        return out


def load_config(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(str(path), "config file not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"invalid TOML: {exc}") from None


def build_config(raw: dict, *, seed_override: int | None = None) -> tuple[DmftConfig, dict]:
    """Validate the raw TOML tree into a DmftConfig plus the sweep section."""
    root = _Section(raw, "")
    lattice = root.section("lattice")
    impurity = root.section("impurity")
    solver = root.section("solver")
    grid = root.section("grid", required=False)
    fit = root.section("fit", required=False)
    sweep = root.section("sweep", required=False)

    n_bath = solver.integer("n_bath", minimum=1)
    cutoffs_raw = solver.number_list("cutoffs")
    cutoffs = []
    for i, c in enumerate(cutoffs_raw):
        if c != int(c) or c < 0:
            raise ConfigError(f"solver.cutoffs[{i}]", f"must be an integer >= 0, got {c:g}")
        cutoffs.append(int(c))
    if len(cutoffs) != n_bath + 1:
        raise ConfigError(
            "solver.cutoffs",
            f"needs 1 impurity + {n_bath} bath entries, got {len(cutoffs)}",
        )

    k0_method = solver.raw.get("k0_method", "kernel")
    if k0_method not in ("kernel", "eig"):
        raise ConfigError("solver.k0_method", f"must be 'kernel' or 'eig', got {k0_method!r}")

    seed = root.integer("seed", default=0, minimum=0)
    if seed_override is not None:
        seed = seed_override

    kwargs = dict(
        J=lattice.number("J", minimum=0.0),
        z=lattice.integer("z", minimum=1),
        omega0=impurity.number("omega0"),
        U=impurity.number("U", minimum=0.0),
        P1=impurity.number("P1", minimum=0.0),
        Gamma2=impurity.number("Gamma2", minimum=0.0),
        n_bath=n_bath,
        cutoffs=tuple(cutoffs),
        mixing=solver.number("mixing", default=0.5, minimum=0.0, exclusive=True),
        tolerance=solver.number("tolerance", default=1e-4, minimum=0.0, exclusive=True),
        max_iterations=solver.integer("max_iterations", default=40, minimum=1),
        k0_method=k0_method,
        seed=seed,
    )
    if kwargs["mixing"] > 1.0:
        raise ConfigError("solver.mixing", f"must be <= 1, got {kwargs['mixing']:g}")
    if grid is not None:
        if "omega_min" in grid.raw:
            kwargs["omega_min"] = grid.number("omega_min")
        if "omega_max" in grid.raw:
            kwargs["omega_max"] = grid.number("omega_max")
        if "n_points" in grid.raw:
            kwargs["n_omega"] = grid.integer("n_points", minimum=2)
    if fit is not None:
        kwargs["fit_restarts"] = fit.integer("restarts", default=4, minimum=1)
        kwargs["fit_jitter"] = fit.number("jitter", default=0.2, minimum=0.0)
        kwargs["chi_exponent"] = fit.number("exponent", default=2.0, minimum=2.0)
        kwargs["weight_retarded"] = fit.number("weight_retarded", default=1.0, minimum=0.0)
        kwargs["weight_keldysh"] = fit.number("weight_keldysh", default=1.0, minimum=0.0)
        kwargs["fit_maxiter"] = fit.integer("maxiter", default=1000, minimum=1)

    sweep_spec = {}
    if sweep is not None:
        sweep_spec["gamma2"] = sweep.number_list("gamma2")
        sweep_spec["warm_start"] = sweep.boolean("warm_start", True)

    try:
        cfg = DmftConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError("solver", str(exc)) from None
    return cfg, sweep_spec


def _plot_run(directory: Path, solution) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .spectral import spectral_functions

    A, C = spectral_functions(solution.gf)
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(6, 6))
    axes[0].plot(solution.gf.grid, A)
    axes[0].set_ylabel(r"$A_{loc}(\omega)$")
    axes[1].plot(solution.gf.grid, C)
    axes[1].set_ylabel(r"$C_{loc}(\omega)$")
    axes[1].set_xlabel(r"$\omega$")
    fig.tight_layout()
    fig.savefig(directory / "spectra.png", dpi=150)
    plt.close(fig)


def _plot_sweep(directory: Path, sweep) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(6, 6))
    axes[0].plot(sweep.gamma2_over_U, sweep.n_loc_normalized, "o-")
    axes[0].set_ylabel(r"$n_{loc}$ (normalized)")
    axes[1].plot(sweep.gamma2_over_U, sweep.gamma1_eff_first, "s-")
    axes[1].set_ylabel(r"$\Gamma^{eff}_{1,11}$")
    axes[1].set_xlabel(r"$\Gamma_2 / U$")
    fig.tight_layout()
    fig.savefig(directory / "zeno.png", dpi=150)
    plt.close(fig)


def _cmd_run(args: argparse.Namespace) -> int:
    raw = load_config(args.config)
    cfg, _ = build_config(raw, seed_override=args.seed)
    started = datetime.now(timezone.utc)
    out = Path(args.out)
    solution = dmft_loop(cfg)
    write_run_artifacts(out, solution, command="run", config=raw, seed=cfg.seed, started_at=started)
    if args.plots:
        _plot_run(out, solution)
    if not solution.converged:
        log.error("run did not converge in %d iterations", cfg.max_iterations)
        return 3
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    raw = load_config(args.config)
    cfg, sweep_spec = build_config(raw, seed_override=args.seed)
    if "gamma2" not in sweep_spec:
        raise ConfigError("sweep.gamma2", "missing required list")
    started = datetime.now(timezone.utc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = sweep_zeno(
        cfg,
        sweep_spec["gamma2"],
        warm_start=sweep_spec.get("warm_start", True),
        jobs=args.jobs,
    )
    for i, sol in enumerate(result.solutions):
        write_run_artifacts(
            out / f"point_{i:02d}",
            sol,
            command="sweep-point",
            config=raw,
            seed=cfg.seed,
            started_at=started,
        )
    write_aggregate_csv(out / "aggregate.csv", result)
    write_manifest(
        out,
        command="sweep",
        config=raw,
        seed=cfg.seed,
        started_at=started,
        outputs=["aggregate.csv", "manifest.json"]
        + [f"point_{i:02d}" for i in range(result.gamma2.size)],
    )
    if args.plots:
        _plot_sweep(out, result)
    return 0 if bool(result.converged.all()) else 3


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bhdmft",
        description="Steady-state DMFT of the driven-dissipative Bose-Hubbard model",
        epilog="Set BHDMFT_LOG=INFO (or DEBUG) for progress logging.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "single DMFT run at the configured operating point"),
        ("sweep", "DMFT across the [sweep].gamma2 list of loss rates"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, required=True, help="TOML configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--plots", action="store_true", help="also write PNG plots (needs matplotlib)")
        if name == "sweep":
            p.add_argument("--jobs", type=int, default=1,
                           help="parallel workers (effective only with warm_start = false)")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=os.environ.get("BHDMFT_LOG", "WARNING").upper(),
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_sweep(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
