"""Truncated bosonic Fock spaces for small impurity-plus-bath clusters.

Each site keeps occupations 0..cutoff.  The composite basis enumerates
occupation tuples lexicographically (last site fastest), which makes the
single-site ladder operators banded in the composite index: lowering site i
moves a state exactly one stride down, where the stride is the product of the
dimensions of all later sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "SiteSpec",
    "CompositeBasis",
    "build_composite_basis",
    "site_annihilator",
    "site_creator",
    "site_number",
]


@dataclass(frozen=True)
class SiteSpec:
    """One bosonic mode with a hard occupation cutoff.

    Parameters
    ----------
    label : str
        Human-readable name, kept for diagnostics and output files.
    cutoff : int
        Largest occupation retained; the local dimension is ``cutoff + 1``.
    """

    label: str
    cutoff: int

    def __post_init__(self) -> None:
        if self.cutoff < 0:
            raise ValueError(f"site {self.label!r}: cutoff must be >= 0, got {self.cutoff}")

    @property
    def dim(self) -> int:
        return self.cutoff + 1


@dataclass(frozen=True)
class CompositeBasis:
    """Tensor-product occupation basis over a sequence of sites.

    Attributes
    ----------
    sites : tuple of SiteSpec
    occupations : ndarray, shape (dim, n_sites)
        Row s holds the occupation tuple of basis state s.
    total : ndarray, shape (dim,)
        Total particle number of each basis state.
    """

    sites: tuple[SiteSpec, ...]
    occupations: np.ndarray = field(repr=False)
    total: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.occupations.shape[0]

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def index(self, occupation: Sequence[int]) -> int:
        """Composite index of an occupation tuple (mixed-radix positional code)."""
        occ = tuple(occupation)
        if len(occ) != self.n_sites:
            raise ValueError(f"expected {self.n_sites} occupations, got {len(occ)}")
        idx = 0
        for site, n in zip(self.sites, occ):
            if not 0 <= n <= site.cutoff:
                raise ValueError(f"occupation {n} outside [0, {site.cutoff}] for site {site.label!r}")
            idx = idx * site.dim + n
        return idx

    def stride(self, site: int) -> int:
        """Index step produced by changing the occupation of one site by one."""
        return math.prod(s.dim for s in self.sites[site + 1:])


def build_composite_basis(sites: Sequence[SiteSpec]) -> CompositeBasis:
    """Enumerate the composite occupation basis.

    Raises
    ------
    ValueError
        If the site list is empty (a cutoff < 0 is rejected by SiteSpec).
    """
    sites = tuple(sites)
    if not sites:
        raise ValueError("at least one site is required")
    dims = [s.dim for s in sites]
    grids = np.indices(dims).reshape(len(dims), -1).T
    occupations = np.ascontiguousarray(grids, dtype=np.int64)
    occupations.setflags(write=False)
    total = occupations.sum(axis=1)
    total.setflags(write=False)
    return CompositeBasis(sites=sites, occupations=occupations, total=total)


def _check_site(basis: CompositeBasis, site: int) -> None:
    if not 0 <= site < basis.n_sites:
        raise ValueError(f"site index {site} outside [0, {basis.n_sites - 1}]")


def site_annihilator(basis: CompositeBasis, site: int) -> np.ndarray:
    """Dense matrix of the lowering operator on one site.

    Matrix elements ``a[s', s] = sqrt(n_site(s))`` where s' equals s with the
    site's occupation lowered by one.  The operator annihilates states already
    at occupation 0 and, because of the cutoff, ``a a† - a† a`` deviates from
    the identity only in the fully occupied level of that site.

    Returns
    -------
    ndarray, shape (dim, dim), complex
    """
    _check_site(basis, site)
    D = basis.dim
    a = np.zeros((D, D), dtype=np.complex128)
    n = basis.occupations[:, site]
    src = np.nonzero(n > 0)[0]
    dst = src - basis.stride(site)
    a[dst, src] = np.sqrt(n[src].astype(np.float64))
    return a


def site_creator(basis: CompositeBasis, site: int) -> np.ndarray:
    """Dense matrix of the raising operator on one site (adjoint of the lowering one)."""
    return site_annihilator(basis, site).conj().T


def site_number(basis: CompositeBasis, site: int) -> np.ndarray:
    """Dense diagonal matrix of the occupation of one site."""
    _check_site(basis, site)
    return np.diag(basis.occupations[:, site].astype(np.complex128))
