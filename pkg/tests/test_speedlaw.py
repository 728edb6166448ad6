import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from kinwave.core import DEFAULT_CAR, DEFAULT_PTW, BeyondJamError, CFLViolation, ClassId
from kinwave.speedlaw import FreeSpaceLaw, check_cfl, make_law, max_wave_speed


def test_mean_free_space_oracle(law):
    # exact rational arithmetic: (1 - 0.15 (1.6 + 7.2) / 3.5) / 0.3
    mpmath.mp.dps = 40
    occ = mpmath.mpf("0.15") * (mpmath.mpf("1.6") + mpmath.mpf("7.2")) / mpmath.mpf("3.5")
    expected = (1 - occ) / mpmath.mpf("0.3")
    assert law.mean_free_space(0.15, 0.15) == pytest.approx(float(expected), rel=1e-14)


@pytest.mark.parametrize("rho", [(0.15, 0.15), (0.3, 0.3), (0.05, 0.4), (0.0, 0.2)])
def test_speed_is_tail_probability_of_exponential_gap(law, rho):
    l_mean = law.mean_free_space(*rho)
    v_ptw, v_car = law.speeds(*rho)
    for p, v in ((law.ptw, v_ptw), (law.car, v_car)):
        tail, _ = integrate.quad(lambda l: math.exp(-l / l_mean) / l_mean, p.r_crit, np.inf, epsabs=1e-14)
        assert v == pytest.approx(p.v_free * tail, rel=1e-10)


def test_empty_road_is_free_flow(law):
    assert law.speeds(0.0, 0.0) == (20.0, 15.0)
    assert law.speeds_from_spacing(np.inf, np.inf) == (20.0, 15.0)


def test_jam_gives_zero_speed(law):
    v = law.speeds(1.0 / DEFAULT_PTW.eff_length, 0.0)
    assert v[0] == pytest.approx(0.0, abs=1e-300)


def test_beyond_jam(law):
    with pytest.raises(BeyondJamError):
        law.speeds(3.0, 0.0)
    v = law.speeds(3.0, 0.0, strict=False)
    assert v == (0.0, 0.0)
    with pytest.raises(ValueError):
        law.speeds(-0.1, 0.0)


def test_greenshields_values(green):
    occ = 0.1 * DEFAULT_PTW.eff_length + 0.2 * DEFAULT_CAR.eff_length
    v = green.speeds(0.1, 0.2)
    assert v[0] == pytest.approx(20.0 * (1 - occ))
    assert v[1] == pytest.approx(15.0 * (1 - occ))


def test_make_law_unknown():
    with pytest.raises(ValueError):
        make_law("triangular", DEFAULT_PTW, DEFAULT_CAR)


def test_monotone_and_bounded_on_random_points(law, green, rng):
    # 1000 admissible density pairs and a small increase of each class
    jam = np.array([1 / DEFAULT_PTW.eff_length, 1 / DEFAULT_CAR.eff_length])
    pts = []
    while len(pts) < 1000:
        r = rng.uniform(0, jam)
        if r @ (1 / jam) < 0.99:
            pts.append(r)
    r1, r2 = np.array(pts).T
    h = 1e-3
    for lw in (law, green):
        v1, v2 = lw.speeds(r1, r2)
        assert np.all((v1 >= 0) & (v1 <= 20.0)) and np.all((v2 >= 0) & (v2 <= 15.0))
        for d1, d2 in ((h, 0.0), (0.0, h)):
            w1, w2 = lw.speeds(r1 + d1, r2 + d2, strict=False)
            assert np.all(w1 <= v1) and np.all(w2 <= v2)


def test_lagrangian_wave_speed_and_cfl_examples(law):
    lam = max_wave_speed(law, "lagrangian")
    # defaults admit the tabulated step: dn / lambda ~ 0.63 s
    assert 0.125 < 7.5 / lam
    check_cfl(0.125, 7.5, lam)
    with pytest.raises(CFLViolation):
        check_cfl(7.5 / lam * 1.01, 7.5, lam)
    # single-vehicle clusters need a much smaller step
    assert 0.05 < 1.0 / lam < 0.125


def test_euler_wave_speed_bounds_free_flow(law):
    lam = max_wave_speed(law, "euler")
    # |dq/drho| at zero density equals the larger free speed
    assert lam >= 20.0
    assert 10.0 / lam > 0.125


def test_wave_speed_single_point_box(law):
    assert max_wave_speed(law, "euler", box=((0.1, 0.1), (0.1, 0.1))) == 0.0


def test_wave_speed_sampling_is_close_to_analytic_greenshields(green):
    # single-class Greenshields: q' = v_f (1 - 2 rho L), so the steepest
    # secant on a 201-point grid is the first one, v_f (1 - 1/200)
    lam = max_wave_speed(green, "euler", box=((0.0, 1 / DEFAULT_PTW.eff_length), (0.0, 0.0)), safety=1.0)
    assert lam == pytest.approx(20.0 * (1 - 1 / 200), rel=1e-9)


def test_describe_lists_open_defaults(law):
    d = law.describe()
    for key in ("r_crit_ptw", "r_crit_car", "eff_length_ptw", "eff_length_car", "v_free_ptw", "v_free_car"):
        assert key in d
    assert d["speed_law"] == "freespace"
    assert FreeSpaceLaw(DEFAULT_PTW, DEFAULT_CAR).speed(ClassId.CAR, 0.0, 0.0) == 15.0
