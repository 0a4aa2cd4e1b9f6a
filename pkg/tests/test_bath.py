import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from bhdmft import BathParams, KeldyshGF, chi_distance, eval_hybridization, fit_bath
from bhdmft.bath import _chi_and_grad, _quad_weights
from bhdmft.lindblad import BathSite

TRUTH = BathParams(
    omega=np.array([0.7, 2.1]),
    nu=np.array([0.35, 0.5]),
    Gamma1=np.array([0.30, 0.45]),
    P1=np.array([0.05, 0.10]),
)

GRID = np.linspace(-2.0, 5.0, 801)


def test_params_validation():
    with pytest.raises(ValueError, match="share one length"):
        BathParams(omega=[0.0, 1.0], nu=[0.1], Gamma1=[0.2, 0.2], P1=[0.0, 0.0])
    with pytest.raises(ValueError, match="rates"):
        BathParams(omega=[0.0], nu=[0.1], Gamma1=[-0.2], P1=[0.0])
    with pytest.raises(ValueError, match="rates"):
        BathParams(omega=[0.0], nu=[0.1], Gamma1=[0.2], P1=[-0.1])
    p = BathParams(omega=[0.0], nu=[0.1], Gamma1=[0.2], P1=[0.05])
    assert p.n_sites == 1
    assert_allclose(p.width, [0.15])
    with pytest.raises(ValueError):
        p.omega[0] = 3.0  # arrays are frozen


def test_params_sorted_orders_by_energy():
    p = BathParams(
        omega=[2.0, -1.0, 0.5],
        nu=[0.1, -0.2, 0.3],
        Gamma1=[0.4, 0.5, 0.6],
        P1=[0.0, 0.1, 0.2],
    )
    s = p.sorted()
    assert_allclose(s.omega, [-1.0, 0.5, 2.0])
    assert_allclose(s.nu, [0.2, 0.3, 0.1])  # couplings made non-negative
    assert_allclose(s.Gamma1, [0.5, 0.6, 0.4])
    assert_allclose(s.P1, [0.1, 0.2, 0.0])


def test_params_site_roundtrip():
    sites = TRUTH.to_sites()
    assert all(isinstance(s, BathSite) for s in sites)
    back = BathParams.from_sites(sites)
    for f in ("omega", "nu", "Gamma1", "P1"):
        assert_allclose(getattr(back, f), getattr(TRUTH, f), atol=0)


def test_eval_hybridization_hand_formula():
    hyb = eval_hybridization(TRUTH, GRID)
    ret = np.zeros_like(GRID, dtype=complex)
    kel = np.zeros_like(GRID, dtype=complex)
    for w, v, g, p in zip(TRUTH.omega, TRUTH.nu, TRUTH.Gamma1, TRUTH.P1):
        ret += v**2 / (GRID - w + 1j * (g - p))
        kel += -2j * v**2 * (g + p) / ((GRID - w) ** 2 + (g - p) ** 2)
    assert_allclose(hyb.retarded, ret, atol=1e-15)
    assert_allclose(hyb.keldysh, kel, atol=1e-15)
    assert isinstance(hyb, KeldyshGF)


@settings(max_examples=40, derandomize=True)
@given(st.integers(0, 2**32 - 1))
def test_eval_hybridization_signs(seed):
    # damped bath (Gamma > P): Im Delta^R < 0 and Delta^K purely imaginary
    # with Im Delta^K < 0, on any grid
    rng = np.random.default_rng(seed)
    n = rng.integers(1, 4)
    width = rng.uniform(0.05, 1.0, n)
    pump = rng.uniform(0.0, 1.0, n)
    params = BathParams(
        omega=rng.uniform(-3.0, 3.0, n),
        nu=rng.uniform(0.05, 1.0, n),
        Gamma1=width + pump,
        P1=pump,
    )
    hyb = eval_hybridization(params, np.linspace(-6.0, 6.0, 101))
    assert np.all(hyb.retarded.imag < 0)
    assert np.abs(hyb.keldysh.real).max() == 0.0
    assert np.all(hyb.keldysh.imag < 0)


def test_quad_weights_trapezoid():
    grid = np.array([0.0, 1.0, 3.0, 3.5])
    assert_allclose(_quad_weights(grid), [0.5, 1.5, 1.25, 0.25])
    assert _quad_weights(grid).sum() == pytest.approx(3.5)
    with pytest.raises(ValueError, match="increasing"):
        _quad_weights(np.array([0.0, 2.0, 1.0]))
    with pytest.raises(ValueError, match="at least two"):
        _quad_weights(np.array([0.0]))


def test_chi_two_point_hand_value():
    # unit spacing, unit weights, squared difference (1, 0): trapezoid puts
    # weight 1/2 on each endpoint, so chi = 1/2
    grid = np.array([0.0, 1.0])
    a = KeldyshGF(grid=grid, retarded=np.array([1.0, 0.0]), keldysh=np.zeros(2))
    b = KeldyshGF.zeros(grid)
    assert chi_distance(a, b) == pytest.approx(0.5, abs=0)
    assert chi_distance(a, a) == 0.0
    assert chi_distance(b, a) == chi_distance(a, b)


def test_chi_component_weights():
    grid = np.linspace(0.0, 1.0, 7)
    rng = np.random.default_rng(3)
    a = KeldyshGF(
        grid=grid,
        retarded=rng.normal(size=7) + 1j * rng.normal(size=7),
        keldysh=1j * rng.normal(size=7),
    )
    b = KeldyshGF.zeros(grid)
    full = chi_distance(a, b)
    ret_only = chi_distance(a, b, weights=(1.0, 0.0))
    kel_only = chi_distance(a, b, weights=(0.0, 1.0))
    assert full == pytest.approx(ret_only + kel_only, rel=1e-14)
    assert chi_distance(a, b, weights=(2.0, 2.0)) == pytest.approx(2 * full, rel=1e-14)


def test_chi_rejects_bad_input():
    a = KeldyshGF.zeros(np.linspace(0, 1, 5))
    b = KeldyshGF.zeros(np.linspace(0, 2, 5))
    with pytest.raises(ValueError, match="grids differ"):
        chi_distance(a, b)
    c = KeldyshGF.zeros(a.grid)
    with pytest.raises(ValueError, match="exponent"):
        chi_distance(a, c, exponent=0.5)
    with pytest.raises(ValueError, match="weights"):
        chi_distance(a, c, weights=(-1.0, 1.0))


@pytest.mark.parametrize("exponent", [2.0, 3.0])
def test_chi_gradient_matches_finite_differences(exponent):
    grid = np.linspace(-2.0, 4.0, 241)
    target = eval_hybridization(TRUTH, grid)
    q = _quad_weights(grid)
    ones = np.ones_like(grid)
    args = (2, target.retarded, target.keldysh, grid, q, ones, ones, exponent)

    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        x = np.concatenate(
            [
                rng.uniform(-1.5, 3.0, 2),  # omega
                rng.uniform(0.1, 0.8, 2),  # nu
                rng.uniform(0.05, 0.6, 2),  # width
                rng.uniform(0.0, 0.3, 2),  # pump
            ]
        )
        _, grad = _chi_and_grad(x, *args)
        fd = np.empty_like(x)
        for i in range(x.size):
            h = 1e-6 * max(abs(x[i]), 1.0)
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            fd[i] = (_chi_and_grad(xp, *args)[0] - _chi_and_grad(xm, *args)[0]) / (2 * h)
        scale = max(np.abs(fd).max(), 1e-12)
        worst = max(worst, float(np.abs(grad - fd).max() / scale))
    assert worst < 1e-6


def perturbed(params, rng, amount=0.10):
    def wobble(arr):
        return arr * (1.0 + amount * rng.uniform(-1.0, 1.0, arr.shape))

    return BathParams(
        omega=wobble(params.omega),
        nu=wobble(params.nu),
        Gamma1=wobble(params.Gamma1),
        P1=wobble(params.P1),
    )


def test_fit_roundtrip_recovers_parameters():
    target = eval_hybridization(TRUTH, GRID)
    init = perturbed(TRUTH, np.random.default_rng(5))
    params, report = fit_bath(target, init=init, rng=np.random.default_rng(0))
    assert report.chi < 1e-8
    truth = TRUTH.sorted()
    for f in ("omega", "nu", "Gamma1", "P1"):
        got, want = getattr(params, f), getattr(truth, f)
        assert np.abs(got - want).max() / np.abs(want).max() < 1e-4, f
    # fitted parameters still satisfy the container invariants
    assert np.all(params.Gamma1 >= 0) and np.all(params.P1 >= 0)
    assert np.all(params.width >= 0)


def test_fit_monotone_progress():
    target = eval_hybridization(TRUTH, GRID)
    init = perturbed(TRUTH, np.random.default_rng(9), amount=0.4)
    chi_init = chi_distance(eval_hybridization(init, GRID), target)
    _, report = fit_bath(target, init=init, restarts=1)
    assert report.chi <= chi_init
    assert report.chi == min(report.restart_chis)
    assert report.restarts == 1


def test_fit_from_heuristic_start():
    # no init: only n_sites; the default start must still find the target
    target = eval_hybridization(TRUTH, GRID)
    params, report = fit_bath(target, n_sites=2, rng=np.random.default_rng(1))
    assert report.chi < 1e-6
    assert len(report.restart_chis) == report.restarts == 4


def test_fit_argument_validation():
    target = eval_hybridization(TRUTH, GRID)
    with pytest.raises(ValueError, match="n_sites or an initial"):
        fit_bath(target)
    with pytest.raises(ValueError, match="expected 3"):
        fit_bath(target, n_sites=3, init=TRUTH)
    with pytest.raises(ValueError, match="exponent"):
        fit_bath(target, n_sites=2, exponent=1.5)


def test_fit_deterministic_with_seeded_rng():
    target = eval_hybridization(TRUTH, GRID)
    init = perturbed(TRUTH, np.random.default_rng(2))
    runs = [
        fit_bath(target, init=init, rng=np.random.default_rng(42)) for _ in range(2)
    ]
    (p1, r1), (p2, r2) = runs
    for f in ("omega", "nu", "Gamma1", "P1"):
        assert np.array_equal(getattr(p1, f), getattr(p2, f))
    assert r1.restart_chis == r2.restart_chis
    assert r1.chi == r2.chi
