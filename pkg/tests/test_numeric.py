import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deltaq import _backend
from deltaq.numeric import (DeltaQ, Grid, GridMismatch, all_to_finish, any_to_finish, atom,
                            cdf_distance, convolve, failure, intangible_mass, leq, mixture,
                            perfection, properise_irv)

from helpers import (assert_dq_close, random_dq, ref_max, ref_min, ref_sum,
                     reference_binary)

GRID = Grid(0.1, 40)


def test_grid_from_tmax_defaults_to_thousand_bins():
    g = Grid.from_tmax(50)
    assert g.n_bins == 1000 and g.dt == pytest.approx(0.05)
    assert Grid.from_tmax(50, 0.01).n_bins == 5000


@pytest.mark.parametrize("dt,n", [(0, 10), (-1, 10), (0.1, 0), (0.1, 2.5)])
def test_grid_rejects_bad_parameters(dt, n):
    with pytest.raises(ValueError):
        Grid(dt, n)


def test_deltaq_validates_total_mass():
    with pytest.raises(ValueError):
        DeltaQ(GRID, np.full(GRID.size, 0.1))
    with pytest.raises(ValueError):
        DeltaQ(GRID, np.zeros(GRID.size), intangible=1.2)
    with pytest.raises(ValueError):
        DeltaQ(GRID, np.zeros(3), intangible=1.0)


def test_deltaq_is_immutable():
    d = perfection(GRID)
    with pytest.raises(AttributeError):
        d.overflow = 0.5
    with pytest.raises(ValueError):
        d.mass[0] = 0.5


def test_constants():
    top, bot = perfection(GRID), failure(GRID)
    assert top.cdf[0] == 1.0 and top.intangible == 0.0
    assert bot.cdf[-1] == 0.0 and bot.intangible == 1.0
    assert intangible_mass(bot) == 1.0


def test_atom_rounds_and_overflows():
    assert atom(GRID, 0.26).mass[3] == 1.0
    far = atom(GRID, 100.0, tangible=0.25)
    assert far.overflow == 0.25 and far.intangible == 0.75


def test_convolution_of_atoms():
    d = convolve(atom(GRID, 1.0, 0.5), atom(GRID, 2.0, 0.8))
    assert d.mass[30] == pytest.approx(0.4)
    assert d.intangible == pytest.approx(1 - 0.4)


def test_convolution_spills_to_overflow():
    d = convolve(atom(GRID, 3.0), atom(GRID, 2.0))
    assert d.overflow == pytest.approx(1.0) and d.in_grid == 0.0


def test_mixture_weights():
    d = mixture(perfection(GRID), failure(GRID), 3, 1)
    assert d.intangible == pytest.approx(0.25)
    with pytest.raises(ValueError):
        mixture(perfection(GRID), failure(GRID), 0, 0)


def test_grid_mismatch():
    with pytest.raises(GridMismatch):
        convolve(perfection(GRID), perfection(Grid(0.1, 41)))


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("op,ref", [(convolve, ref_sum), (all_to_finish, ref_max),
                                    (any_to_finish, ref_min)])
def test_kernels_match_reference_model(seed, op, ref):
    rng = np.random.default_rng(seed)
    grid = Grid(0.5, 24)
    a, b = random_dq(rng, grid), random_dq(rng, grid)
    assert_dq_close(op(a, b), reference_binary(a, b, ref), tol=1e-12, im_tol=1e-15)


def test_intangible_algebra():
    rng = np.random.default_rng(7)
    for _ in range(200):
        a, b = random_dq(rng, GRID), random_dq(rng, GRID)
        ia, ib = a.intangible, b.intangible
        assert convolve(a, b).intangible == pytest.approx(ia + ib - ia * ib, abs=1e-15)
        assert all_to_finish(a, b).intangible == pytest.approx(ia + ib - ia * ib, abs=1e-15)
        assert any_to_finish(a, b).intangible == pytest.approx(ia * ib, abs=1e-15)
        assert mixture(a, b, 1, 3).intangible == pytest.approx(0.25 * ia + 0.75 * ib, abs=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_fft_matches_direct(seed):
    rng = np.random.default_rng(seed)
    grid = Grid(0.01, 3000)
    a, b = random_dq(rng, grid), random_dq(rng, grid)
    assert_dq_close(convolve(a, b, "fft"), convolve(a, b, "direct"), tol=1e-12)


def test_unknown_convolution_method():
    with pytest.raises(ValueError):
        convolve(perfection(GRID), perfection(GRID), "magic")


@pytest.mark.parametrize("name", _backend.available())
def test_backends_agree(name):
    rng = np.random.default_rng(11)
    a, b = random_dq(rng, GRID), random_dq(rng, GRID)
    base = [op(a, b) for op in (convolve, all_to_finish, any_to_finish)]
    with _backend.using(name):
        assert _backend.current() == name
        got = [op(a, b) for op in (convolve, all_to_finish, any_to_finish)]
    for x, y in zip(base, got):
        assert_dq_close(x, y, tol=1e-14, im_tol=1e-15)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.set_backend("fortran")


def test_properise_irv():
    d = DeltaQ(GRID, np.r_[0.2, 0.3, np.zeros(GRID.size - 2)], 0.1, 0.4)
    p = properise_irv(d)
    assert p.intangible == 0.0
    assert p.mass[:2] == pytest.approx([1 / 3, 0.5])
    assert p.overflow == pytest.approx(1 / 6)
    with pytest.raises(ValueError):
        properise_irv(failure(GRID))


def test_leq_is_a_partial_order():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b, c = (random_dq(rng, GRID) for _ in range(3))
        assert leq(a, a)
        if leq(a, b) and leq(b, a):
            assert cdf_distance(a, b) <= 2e-9
        if leq(a, b) and leq(b, c):
            assert leq(a, c, tol=2e-9)
        assert leq(perfection(GRID), a) and leq(a, failure(GRID))


def test_leq_respects_failure():
    late = atom(GRID, 3.0)
    early_unreliable = atom(GRID, 0.0, 0.9)
    assert not leq(early_unreliable, late)
    assert not leq(late, early_unreliable)


def test_cdf_at_interpolates():
    d = mixture(atom(GRID, 1.0), atom(GRID, 2.0), 1, 1)
    assert d.cdf_at(1.0) == pytest.approx(0.5)
    assert d.cdf_at(0.95) == pytest.approx(0.25)
    assert d.cdf_at(-1) == 0.0
    with pytest.raises(ValueError):
        d.cdf_at(10)


def test_csv_layout():
    text = atom(Grid(1.0, 2), 1.0, 0.5).to_csv().splitlines()
    assert text == ["t,cdf", "0.0,0.0", "1.0,0.5", "2.0,0.5", "# overflow=0.0",
                    "# intangible=0.5"]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=GRID.size, max_size=GRID.size),
       st.floats(0, 1), st.floats(0, 1))
def test_total_mass_preserved(weights, ov, im):
    raw = np.array(weights) + 1e-3
    total = raw.sum() + ov + im
    a = DeltaQ(GRID, raw / total, ov / total, im / total)
    for op in (convolve, all_to_finish, any_to_finish):
        d = op(a, a)
        assert d.in_grid + d.overflow + d.intangible == pytest.approx(1.0, abs=1e-12)
