import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from bhdmft.fock import (
    CompositeBasis,
    SiteSpec,
    build_composite_basis,
    site_annihilator,
    site_creator,
    site_number,
)


def kron_chain(mats):
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def local_lowering(cutoff: int) -> np.ndarray:
    d = cutoff + 1
    a = np.zeros((d, d), dtype=np.complex128)
    for n in range(1, d):
        a[n - 1, n] = np.sqrt(n)
    return a


def test_sitespec_rejects_negative_cutoff():
    with pytest.raises(ValueError, match="cutoff"):
        SiteSpec("x", -1)


def test_sitespec_dim():
    assert SiteSpec("imp", 5).dim == 6


def test_empty_site_list_rejected():
    with pytest.raises(ValueError, match="at least one site"):
        build_composite_basis([])


def test_enumeration_last_site_fastest():
    basis = build_composite_basis([SiteSpec("A", 1), SiteSpec("B", 2)])
    expected = [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]
    assert basis.dim == 6
    assert [tuple(row) for row in basis.occupations] == expected
    assert_array_equal(basis.total, [0, 1, 2, 1, 2, 3])


def test_index_inverts_enumeration():
    basis = build_composite_basis([SiteSpec("A", 2), SiteSpec("B", 1), SiteSpec("C", 3)])
    for s in range(basis.dim):
        assert basis.index(basis.occupations[s]) == s


def test_index_validates():
    basis = build_composite_basis([SiteSpec("A", 2), SiteSpec("B", 1)])
    with pytest.raises(ValueError, match="expected 2 occupations"):
        basis.index((1,))
    with pytest.raises(ValueError, match="outside"):
        basis.index((1, 2))


def test_stride_is_product_of_later_dims():
    basis = build_composite_basis([SiteSpec("A", 2), SiteSpec("B", 1), SiteSpec("C", 3)])
    assert basis.stride(0) == 2 * 4
    assert basis.stride(1) == 4
    assert basis.stride(2) == 1


def test_occupations_read_only():
    basis = build_composite_basis([SiteSpec("A", 1)])
    with pytest.raises(ValueError):
        basis.occupations[0, 0] = 7


def test_annihilator_single_site_matrix():
    basis = build_composite_basis([SiteSpec("A", 3)])
    assert_allclose(site_annihilator(basis, 0), local_lowering(3), atol=0)


def test_site_operators_factorize_as_kron():
    cutoffs = (2, 1, 2)
    basis = build_composite_basis([SiteSpec(f"s{i}", c) for i, c in enumerate(cutoffs)])
    eyes = [np.eye(c + 1) for c in cutoffs]
    for i, c in enumerate(cutoffs):
        mats = list(eyes)
        mats[i] = local_lowering(c)
        assert_allclose(site_annihilator(basis, i), kron_chain(mats), atol=0)


def test_creator_is_adjoint():
    basis = build_composite_basis([SiteSpec("A", 3), SiteSpec("B", 2)])
    for i in range(2):
        assert_array_equal(site_creator(basis, i), site_annihilator(basis, i).conj().T)


def test_number_operator_matches_occupations():
    basis = build_composite_basis([SiteSpec("A", 3), SiteSpec("B", 2)])
    for i in range(2):
        n_direct = np.diag(basis.occupations[:, i]).astype(np.complex128)
        assert_array_equal(site_number(basis, i), n_direct)
        a = site_annihilator(basis, i)
        assert_allclose(a.conj().T @ a, n_direct, atol=1e-15)


def test_truncated_commutator():
    # [a, a†] = 1 - (c+1) |c><c| on the site's factor, exactly
    cutoffs = (3, 2)
    basis = build_composite_basis([SiteSpec(f"s{i}", c) for i, c in enumerate(cutoffs)])
    for i, c in enumerate(cutoffs):
        a = site_annihilator(basis, i)
        comm = a @ a.conj().T - a.conj().T @ a
        top = (basis.occupations[:, i] == c).astype(np.complex128)
        assert_allclose(comm, np.diag(1.0 - (c + 1) * top), atol=1e-15)


def test_site_index_out_of_range():
    basis = build_composite_basis([SiteSpec("A", 1)])
    with pytest.raises(ValueError, match="site index"):
        site_annihilator(basis, 1)
    with pytest.raises(ValueError, match="site index"):
        site_number(basis, -1)


@settings(max_examples=40, derandomize=True)
@given(st.lists(st.integers(min_value=0, max_value=4), min_size=1, max_size=3))
def test_basis_roundtrip_property(cutoffs):
    basis = build_composite_basis([SiteSpec(f"s{i}", c) for i, c in enumerate(cutoffs)])
    assert basis.dim == int(np.prod([c + 1 for c in cutoffs]))
    # raising one site's occupation moves the index by exactly its stride
    for s in range(basis.dim):
        occ = basis.occupations[s]
        assert basis.index(occ) == s
        for i, c in enumerate(cutoffs):
            if occ[i] < c:
                raised = list(occ)
                raised[i] += 1
                assert basis.index(raised) == s + basis.stride(i)
