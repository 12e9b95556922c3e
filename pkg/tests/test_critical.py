import math

import numpy as np
import pytest

from superradiant import critical, landau
from superradiant.critical import Axis, Ray
from superradiant.model import Family, make_spec


def test_dqr_closed_form():
    assert critical.critical_line_dqr(math.inf) == pytest.approx(math.sqrt(0.5))
    assert critical.critical_line_dqr(1.0) == pytest.approx(1 / math.sqrt(2 * math.tanh(1.0)))
    assert critical.critical_line_dqr(1e-320) == math.inf or critical.critical_line_dqr(1e-320) > 1e100


def test_two_photon_closed_form():
    gc, jump = critical.critical_line_twophoton(0.25)
    assert gc == pytest.approx(0.6123724357)
    assert jump == pytest.approx(2 / 3)


def test_xyz_isotropic_forms_meet_on_common_line():
    a = critical.xyz_isotropic_closed_form(0.5 + 1e-12, 1.0)
    b = critical.xyz_isotropic_closed_form(0.5 - 1e-12, 1.0)
    assert a.t_c == pytest.approx(b.t_c, abs=1e-5)
    assert a.t_c**2 == pytest.approx(0.25, abs=1e-5)


@pytest.mark.parametrize("eps,delta", [(1.0, 1.0), (0.8, 1.0), (2.0, 1.5), (0.2, 1.0), (0.4, -1.0)])
def test_xyz_isotropic_closed_form_matches_scan(eps, delta):
    cf = critical.xyz_isotropic_closed_form(eps, delta)
    s = make_spec(Family.XYZ, [0.0, 0.0], [delta, delta], epsilon_alpha=(eps, eps, eps))
    rec = critical.critical_scan(s, Ray((1.0, 1.0)), (0.01, 2.0), 0.01)
    assert rec.order == cf.order
    assert rec.t_c == pytest.approx(cf.t_c, abs=2e-6)
    assert rec.jump == pytest.approx(cf.jump, abs=1e-3)


def random_rays(n, dim, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        d = np.abs(rng.normal(size=dim)) + 0.05
        yield tuple(d / np.linalg.norm(d))


@pytest.mark.parametrize("bD", [math.inf, 1.0])
def test_dqr_rays_against_indicator(bD):
    delta = (1.0, 1.0, 1.0)
    th = 1.0 if math.isinf(bD) else math.tanh(bD)
    for d in random_rays(10, 3, 7):
        s = make_spec(Family.DQR, [0.0] * 3, delta, beta_Delta=bD)
        rec = critical.critical_scan(s, Ray(d), (0.0, 3.0), 0.02)
        # mean(gamma_i^2) = 1 / (2 tanh)
        exact = 1.0 / math.sqrt(2 * th * np.mean(np.square(d)))
        assert rec.order == "second"
        assert rec.t_c == pytest.approx(exact, abs=2e-6)


def test_aniso_rays_against_indicator():
    delta = (1.0, 0.6)
    lam = (0.4, -0.3)
    for d in random_rays(10, 2, 11):
        s = make_spec(Family.ANISO, [0.0, 0.0], delta, lam=lam)
        rec = critical.critical_scan(s, Ray(d), (0.0, 6.0), 0.02)
        at = Ray(d).at(s, rec.t_c).params
        ind = max(critical.critical_condition_aniso(at, "u"), critical.critical_condition_aniso(at, "v"))
        assert ind == pytest.approx(0.0, abs=1e-5)
        assert rec.order == "second"


def test_two_photon_rays():
    for gp in (0.0, 0.1, 0.25, 0.4):
        s = make_spec(Family.TWO_PHOTON, 0.0, gamma_prime=gp)
        rec = critical.critical_scan(s, Ray((1.0,)), (0.0, 1.2), 0.01)
        gc, jump = critical.critical_line_twophoton(gp)
        assert rec.t_c == pytest.approx(gc, abs=2e-6)
        assert rec.jump == pytest.approx(jump, abs=1e-3)
        assert rec.order == ("first" if jump >= critical.JUMP_THRESHOLD else "second")


def test_multimode_rays():
    for d in random_rays(10, 2, 5):
        s = make_spec(Family.MULTIMODE, [0.0, 0.0], [1.0, 0.5])
        rec = critical.critical_scan(s, Ray(tuple(np.tile(d, 2))), (0.0, 2.0), 0.02)
        norm = critical.critical_line_multimode(s.params)
        assert rec.t_c * np.linalg.norm(d) == pytest.approx(norm, abs=2e-6)


def test_multimode_per_mode_formula():
    u2 = critical.multimode_order_parameters([0.6, 0.6])
    s = make_spec(Family.MULTIMODE, [0.6, 0.6], [1.0, 1.0])
    res = landau.minimize_global(s)
    assert np.allclose(u2, res.order_parameter, atol=1e-10)


def test_bias_has_no_transition():
    s = make_spec(Family.BIASED, 0.0, epsilon_bias=0.05)
    rec = critical.critical_scan(s, Ray((1.0,)), (0.0, 1.5))
    assert rec.order == "none"


def test_xyz_discriminant_agrees_with_scan():
    s = make_spec(Family.XYZ, [0.0, 1.5], [3.0, 2.0], epsilon_alpha=(3, 2, 1))
    ray = Ray((1.0, 0.0), (0.0, 1.5))
    scan = critical.scan_transitions(s, ray, (0.0, 2.0), 0.01)
    disc = critical.discriminant_transitions(s, ray, (0.0, 2.0), 0.01)
    assert [r.order for r in scan] == [r.order for r in disc] == ["second", "first"]
    for a, b in zip(scan, disc):
        assert abs(a.t_c - b.t_c) < 1e-5


def test_xyz_delta_sign_invariance():
    ray = Ray((1.0, 1.0))
    t = []
    for d in ((1.0, 1.3), (-1.0, -1.3)):
        s = make_spec(Family.XYZ, [0.0, 0.0], d, epsilon_alpha=(1.1, 0.3, 0.5))
        t.append(critical.critical_scan(s, ray, (0.01, 2.0), 0.01).t_c)
    assert t[0] == pytest.approx(t[1], abs=1e-6)


def test_record_invariants():
    with pytest.raises(ValueError):
        critical.TransitionRecord(0.5, "first", 0.0, "scan")
    with pytest.raises(ValueError):
        critical.TransitionRecord(0.5, "second", 1.0, "scan")


def test_set_param_names():
    s = make_spec(Family.XYZ, [0.5, 0.5], [1.0, 1.0])
    assert critical.set_param(s, "gamma_2", 1.5).params.gamma[:, 0].tolist() == [0.5, 1.5]
    assert critical.set_param(s, "epsilon_y", 0.3).params.epsilon_alpha == (0.0, 0.3, 0.0)
    with pytest.raises(ValueError):
        critical.set_param(s, "nope", 1.0)


def test_phase_grid_properties():
    s = make_spec(Family.TWO_PHOTON, 0.0)
    axes = (Axis("gamma", -1.0, 1.0, 21), Axis("gamma_prime", 0.0, 0.4, 5))
    grid = critical.phase_diagram(s, axes)
    # mirror symmetry gamma -> -gamma and a normal region around the origin
    assert np.allclose(grid.order_parameter, grid.order_parameter[::-1], atol=1e-8)
    assert grid.phase[10, 0] == "normal"
    edges = set(grid.edge[grid.edge != ""])
    assert edges <= {"first", "second"}
    assert grid.edge[17, 0] == "" or grid.edge[17, 0] == "second"


def test_phase_grid_parallel_is_deterministic():
    s = make_spec(Family.DQR, 0.0)
    axes = (Axis("gamma", 0.0, 1.2, 7), Axis("beta_Delta", 0.5, 3.0, 4))
    a = critical.phase_diagram(s, axes, workers=1)
    b = critical.phase_diagram(s, axes, workers=3)
    assert np.array_equal(a.order_parameter, b.order_parameter)
    assert list(a.rows()) == list(b.rows())


def test_zero_coupling_row_all_normal():
    s = make_spec(Family.XYZ, [0.0, 0.0], [3.0, 2.0], epsilon_alpha=(3, 2, 1))
    grid = critical.phase_diagram(s, (Axis("gamma_1", 0.0, 0.0, 1), Axis("gamma_2", 0.0, 0.0, 1)))
    assert grid.phase[0, 0] == "normal"


def test_edge_classification_synthetic():
    op = np.array([[0, 0, 0.01, 0.02, 0.03], [0, 0, 2.0, 2.1, 2.2]], dtype=float)
    e = critical.classify_edges(op)
    assert e[0, 2] == "second"
    assert e[1, 2] == "first"
