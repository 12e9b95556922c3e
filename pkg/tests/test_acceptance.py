"""Acceptance criteria 1-11, one test each, with a PASS/FAIL summary line per criterion."""
import contextlib
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from superradiant import bounds, critical, ed, landau, spinblock
from superradiant.critical import Axis, Ray
from superradiant.model import Family, PhysicalParams, make_spec


@contextlib.contextmanager
def criterion(k, budget_s):
    info = {"detail": ""}
    t0 = time.perf_counter()
    try:
        yield info
        dt = time.perf_counter() - t0
        assert dt < budget_s, f"runtime {dt:.1f}s over budget {budget_s}s"
    except BaseException as exc:
        dt = time.perf_counter() - t0
        ACCEPTANCE[k] = (False, f"{info['detail']} [{dt:.2f}s] {type(exc).__name__}: {exc}".strip())
        print(f"criterion {k}: FAIL {info['detail']}")
        raise
    ACCEPTANCE[k] = (True, f"{info['detail']} [{dt:.2f}s]")
    print(f"criterion {k}: PASS {info['detail']}")


def test_criterion_01_dqr_zero_temperature():
    with criterion(1, 1.0) as c:
        s = make_spec(Family.DQR, 0.0)
        rec = critical.critical_scan(s, Ray((1.0,)), (0.0, 1.2), 0.01)
        u2 = landau.order_parameter(make_spec(Family.DQR, 1.0))
        c["detail"] = f"gamma_c={rec.t_c:.7f} ({rec.order}) u2(1)={u2:.9f}"
        assert rec.t_c == pytest.approx(0.707107, abs=1e-4)
        assert rec.order == "second"
        assert u2 == pytest.approx(0.75, abs=1e-6)


def test_criterion_02_dqr_thermal_line():
    with criterion(2, 5.0) as c:
        errs = []
        for bD in (0.5, 1.0, 2.0, 5.0):
            s = make_spec(Family.DQR, 0.0, beta_Delta=bD)
            rec = critical.critical_scan(s, Ray((1.0,)), (0.0, 2.0), 0.02)
            errs.append(abs(rec.t_c - 1.0 / math.sqrt(2.0 * math.tanh(bD))))
        c["detail"] = f"max |gamma_c - closed form| = {max(errs):.2e}"
        assert max(errs) < 1e-5


def test_criterion_03_two_photon_first_order():
    with criterion(3, 30.0) as c:
        s = make_spec(Family.TWO_PHOTON, 0.0, gamma_prime=0.25)
        rec = critical.critical_scan(s, Ray((1.0,)), (0.0, 1.2), 0.01)
        assert rec.order == "first"
        assert rec.t_c == pytest.approx(0.612372, abs=1e-4)
        assert rec.jump == pytest.approx(0.6667, abs=1e-3)
        ga = Axis("gamma", 0.0, 1.2, 241)
        gpa = Axis("gamma_prime", 0.0, 0.45, 46)
        grid = critical.phase_diagram(s, (gpa, ga), workers=critical.default_workers())
        cell = ga.values[1] - ga.values[0]
        worst = 0.0
        for i, gp in enumerate(gpa.values):
            sr = np.nonzero(grid.phase[i] == "superradiant")[0]
            assert sr.size and np.all(np.diff(sr) == 1) and sr[-1] == ga.count - 1
            edge = ga.values[sr[0]]
            exact = math.sqrt((1.0 - 4.0 * gp**2) / 2.0)
            worst = max(worst, abs(edge - exact))
        c["detail"] = f"gamma_c={rec.t_c:.7f} jump={rec.jump:.6f} boundary offset={worst:.4f} (cell {cell:.4f})"
        assert worst <= cell


def test_criterion_04_two_photon_ed():
    with criterion(4, 300.0) as c:
        C, gp, n_max = 200.0, 0.25, 600
        gc, jump = critical.critical_line_twophoton(gp)

        def photons(g):
            H, h, _ = ed.hamiltonian_for(make_spec(Family.TWO_PHOTON, g, gamma_prime=gp), C, n_max)
            return ed.eigensolve_lowest(H, 1, h).photon_number[0, 0]

        lo, hi = gc - 0.01, gc + 0.01
        n_lo, n_hi = photons(lo), photons(hi)
        assert n_lo < 1.0 < n_hi
        half = 0.5 * C * jump
        a, b = lo, hi
        while b - a > 1e-6:
            m = 0.5 * (a + b)
            if photons(m) > half:
                b = m
            else:
                a = m
        below, above = photons(a), photons(b)
        c["detail"] = f"ED jump at gamma={b:.6f}: <n> {below:.3f} -> {above:.2f} (window width {hi - lo:.3f})"
        assert below < 1.0
        assert above == pytest.approx(400.0 / 3.0, abs=7.0)


def test_criterion_05_rabi_variational_vs_ed():
    with criterion(5, 180.0) as c:
        C = 256.0
        s = make_spec(Family.DQR, 1.0)
        H, h, _ = ed.hamiltonian_for(s, C, 512)
        res = ed.eigensolve_lowest(H, 1, h)
        n_ed = res.photon_number[0, 0]
        vs = spinblock.variational_state(s, landau.minimize_global(s), C)
        n, pe, pg = spinblock.photon_distribution_variational(vs, 512)
        d = res.distribution
        tv = 0.5 * (np.abs(d[:, 0] - pe).sum() + np.abs(d[:, 1] - pg).sum())
        c["detail"] = f"<n>_ED={n_ed:.3f} TV={tv:.4f}"
        assert n_ed == pytest.approx(192.0, abs=2.0)
        assert tv < 0.05


def test_criterion_06_xyz_closed_forms():
    with criterion(6, 10.0) as c:
        ray = Ray((1.0, 1.0))
        first = critical.critical_scan(make_spec(Family.XYZ, [0.0, 0.0], [1.0, 1.0], epsilon_alpha=(1, 1, 1)),
                                       ray, (0.01, 1.5), 0.01)
        second = critical.critical_scan(make_spec(Family.XYZ, [0.0, 0.0], [1.0, 1.0], epsilon_alpha=(0.2, 0.2, 0.2)),
                                        ray, (0.01, 1.5), 0.01)
        c["detail"] = (f"eps=1: gamma_c={first.t_c:.6f} jump={first.jump:.5f} ({first.order}); "
                       f"eps=0.2: gamma_c={second.t_c:.6f} ({second.order})")
        assert second.order == "second"
        assert second.t_c == pytest.approx(0.5, abs=1e-4)
        assert first.order == "first"
        assert first.t_c == pytest.approx(0.70711, abs=1e-4)
        assert first.jump == pytest.approx(1.75, abs=1e-3)


def test_criterion_07_xyz_figures():
    with criterion(7, 60.0) as c:
        cases = [
            ("S5", make_spec(Family.XYZ, [0.0, 0.0], [1.0, 1.0], epsilon_alpha=(1, 0, 0)), Ray((1.0, 1.0))),
            ("S6", make_spec(Family.XYZ, [0.0, 0.0], [1.0, 1.0], epsilon_alpha=(1.1, 0.3, 0.5)), Ray((1.0, 1.0))),
            ("fig2", make_spec(Family.XYZ, [0.0, 1.5], [3.0, 2.0], epsilon_alpha=(3, 2, 1)), Ray((1.0, 0.0), (0.0, 1.5))),
        ]
        out, gaps = {}, []
        for name, s, ray in cases:
            scan = critical.scan_transitions(s, ray, (0.0, 2.0), 0.01)
            disc = critical.discriminant_transitions(s, ray, (0.0, 2.0), 0.01)
            assert [r.order for r in scan] == [r.order for r in disc]
            gaps += [abs(a.t_c - b.t_c) for a, b in zip(scan, disc)]
            out[name] = scan
        s5, s6, f2 = out["S5"][0], out["S6"][0], out["fig2"]
        c["detail"] = (f"S5 {s5.t_c:.5f}/{s5.jump:.4f}, S6 {s6.t_c:.6f}/{s6.jump:.5f}, "
                       f"fig2 {f2[0].t_c:.4f}({f2[0].order}) {f2[1].t_c:.4f}({f2[1].order})/{f2[1].jump:.3f}, "
                       f"max scan-disc gap {max(gaps):.1e}")
        assert s5.order == "first" and s5.t_c == pytest.approx(0.803, abs=0.003) and s5.jump == pytest.approx(1.308, abs=0.01)
        assert s6.t_c == pytest.approx(0.781063, abs=1e-3) and s6.jump == pytest.approx(1.65378, abs=2e-3)
        assert [r.order for r in f2] == ["second", "first"]
        assert f2[0].t_c == pytest.approx(0.778, abs=0.005)
        assert f2[1].t_c == pytest.approx(1.31, abs=0.01) and f2[1].jump == pytest.approx(6.21, abs=0.05)
        assert max(gaps) < 1e-5


def test_criterion_08_multimode():
    with criterion(8, 10.0) as c:
        s = make_spec(Family.MULTIMODE, [0.0, 0.0], [1.0, 1.0])
        d = 1.0 / math.sqrt(2.0)
        rec = critical.critical_scan(s, Ray((d, d, d, d)), (0.0, 1.5), 0.01)
        s6 = make_spec(Family.MULTIMODE, [0.6, 0.6], [1.0, 1.0])
        res = landau.minimize_global(s6)
        full = landau.minimize_global(s6, landau.ScanBudget(reduce=False))
        u = np.array(full.minima[0])
        ang = math.acos(min(1.0, abs(u @ np.array([d, d])) / np.linalg.norm(u)))
        c["detail"] = f"norm_c={rec.t_c:.6f} u_nu^2={res.order_parameter[0]:.7f} angle={ang:.1e}"
        assert rec.t_c == pytest.approx(0.70711, abs=1e-4)
        assert res.order_parameter[0] == pytest.approx(0.186389, abs=1e-5)
        assert res.order_parameter[1] == pytest.approx(0.186389, abs=1e-5)
        assert ang < 1e-6


def test_criterion_09_bias_kills_transition():
    with criterion(9, 5.0) as c:
        s = make_spec(Family.BIASED, 0.0, epsilon_bias=0.05)
        rec = critical.critical_scan(s, Ray((1.0,)), (0.0, 1.5))
        gs = np.linspace(0.005, 1.5, 300)
        u2 = np.array([landau.order_parameter(make_spec(Family.BIASED, g, epsilon_bias=0.05)) for g in gs])
        steps = np.abs(np.diff(u2))
        # local slope estimate: the larger neighbouring step
        local = np.maximum(np.r_[steps[1:], steps[-1]], np.r_[steps[0], steps[:-1]])
        ratio = float(np.max(steps / np.maximum(local, 1e-300)))
        c["detail"] = f"order={rec.order} min u2={u2.min():.3e} max step/neighbour={ratio:.2f}"
        assert rec.order == "none"
        assert np.all(u2 > 0)
        assert ratio < 10.0


def _random_physical(family, rng):
    omega = 1.0
    if family is Family.DQR:
        N = int(rng.integers(1, 3))
        D = rng.uniform(0.5, 2.0, N)
        g = rng.uniform(0.1, 1.5, (N, 1)) * np.sqrt(D.mean())
        return PhysicalParams.make(omega=[omega], Delta=D, g=g), N
    if family is Family.TC:
        N = int(rng.integers(1, 3))
        D = rng.uniform(0.5, 2.0, N)
        g = rng.uniform(0.1, 2.5, (N, 1)) * np.sqrt(D.mean())
        return PhysicalParams.make(omega=[omega], Delta=D, g=g, lam=[0.0] * N), N
    if family is Family.TWO_PHOTON:
        D = rng.uniform(0.5, 2.0, 1)
        g = rng.uniform(0.1, 1.2, (1, 1)) * np.sqrt(D)
        return PhysicalParams.make(omega=[omega], Delta=D, g=g, g_prime=float(rng.uniform(0.0, 0.3))), 1
    D = rng.uniform(0.5, 2.0, 2)
    g = rng.uniform(0.1, 1.5, (2, 1)) * np.sqrt(D.mean())
    J = tuple(rng.uniform(-1.0, 1.0, 3))
    return PhysicalParams.make(omega=[omega], Delta=D, g=g, J=J), 2


def test_criterion_10_bounds_suite():
    with criterion(10, 600.0) as c:
        rng = np.random.default_rng(2024)
        worst, count = math.inf, 0
        for family in (Family.DQR, Family.TC, Family.TWO_PHOTON, Family.XYZ):
            for _ in range(20):
                p, N = _random_physical(family, rng)
                for bw in (0.5, 1.0):
                    rep = bounds.verify_bounds(family, p, bw, ed.HilbertSpec(24, N, 1))
                    worst = min(worst, *rep.log_margins)
                    assert rep.holds(1e-7), (family, p, bw, rep)
                    count += 1
        c["detail"] = f"{count} checks, smallest log margin {worst:.3e}"


def _sym_specs(rng):
    g = rng.uniform(0.1, 2.0, 2)
    d = rng.uniform(-2.0, 2.0, 2)
    return [
        make_spec(Family.DQR, g, d),
        make_spec(Family.ANISO, g, d, lam=rng.uniform(-1, 1, 2)),
        make_spec(Family.XYZ, g, d, epsilon_alpha=rng.uniform(-1.5, 1.5, 3)),
        make_spec(Family.MULTIMODE, g, d, beta_Delta=float(rng.uniform(0.5, 5))),
    ]


def test_criterion_11_property_suites():
    with criterion(11, 120.0) as c:
        rng = np.random.default_rng(11)
        # mirror and rotation invariance
        for _ in range(1000):
            for s in _sym_specs(rng):
                u = rng.uniform(-3, 3, s.arity)
                pt = u[0] if s.arity == 1 else u
                assert landau.phi(s, -pt) == landau.phi(s, pt)
            tc = make_spec(Family.TC, rng.uniform(0, 2), rng.uniform(0.2, 2))
            r, a, b = rng.uniform(0, 3), rng.uniform(0, 2 * math.pi), rng.uniform(0, 2 * math.pi)
            pa = landau.phi(tc, (r * math.cos(a), r * math.sin(a)))
            pb = landau.phi(tc, (r * math.cos(b), r * math.sin(b)))
            assert abs(pa - pb) <= 1e-12
        # gradients
        h = 1e-6
        worst = 0.0
        for _ in range(50):
            s = _sym_specs(rng)[int(rng.integers(0, 4))]
            u = rng.uniform(0.2, 1.5, s.arity)
            g = np.atleast_1d(landau.grad_phi(s, u[0] if s.arity == 1 else u))
            for k in range(s.arity):
                e = np.zeros(s.arity)
                e[k] = h
                fa = landau.phi(s, (u + e)[0] if s.arity == 1 else u + e)
                fb = landau.phi(s, (u - e)[0] if s.arity == 1 else u - e)
                fd = (fa - fb) / (2 * h)
                err = abs(g[k] - fd) / max(abs(fd), 1e-3)
                worst = max(worst, err)
        assert worst < 1e-5
        # variational energy above exact ground energy
        gap = math.inf
        families = [Family.DQR, Family.ANISO, Family.TC, Family.BIASED, Family.TWO_PHOTON, Family.XYZ, Family.MULTIMODE]
        for k in range(10):
            fam = families[k % len(families)]
            C = float(rng.uniform(4, 12))
            if fam is Family.XYZ:
                s = make_spec(fam, rng.uniform(0.2, 1.2, 2), rng.uniform(0.5, 1.5, 2), epsilon_alpha=rng.uniform(-1, 1, 3))
            elif fam is Family.MULTIMODE:
                s = make_spec(fam, rng.uniform(0.2, 1.0, 2), [1.0])
            elif fam is Family.TWO_PHOTON:
                s = make_spec(fam, rng.uniform(0.2, 1.0), gamma_prime=float(rng.uniform(0, 0.3)))
            elif fam is Family.ANISO:
                s = make_spec(fam, rng.uniform(0.2, 1.5, 2), [1.0, 0.7], lam=rng.uniform(-1, 1, 2))
            elif fam is Family.BIASED:
                s = make_spec(fam, rng.uniform(0.2, 1.2), epsilon_bias=float(rng.uniform(-0.3, 0.3)))
            else:
                s = make_spec(fam, rng.uniform(0.2, 1.5))
            n_max = min(ed.default_n_max(s, C), 30 if fam is Family.MULTIMODE else 400)
            H, h, _ = ed.hamiltonian_for(s, C, n_max)
            e0 = ed.eigensolve_lowest(H, 1, h).energies[0]
            gap = min(gap, ed.mean_field_energy(s, C) - e0)
        assert gap >= -1e-9
        # radial flow at located first-order points
        flow = 0.0
        for s, ray in [
            (make_spec(Family.TWO_PHOTON, 0.0, gamma_prime=0.25), Ray((1.0,))),
            (make_spec(Family.XYZ, [0.0, 0.0], [1.0, 1.0], epsilon_alpha=(1, 0, 0)), Ray((1.0, 1.0))),
            (make_spec(Family.XYZ, [0.0, 0.0], [1.0, 1.0], epsilon_alpha=(1.1, 0.3, 0.5)), Ray((1.0, 1.0))),
        ]:
            rec = critical.critical_scan(s, ray, (0.0, 1.5), 0.01, cross_check=False)
            at = ray.at(s, rec.t_c + 1e-8)
            res = landau.minimize_global(at)
            u = res.minima[0]
            flow = max(flow, abs(landau.radial_derivative(at, u[0] if at.arity == 1 else u) + 2 * res.total))
        assert flow < 1e-6
        c["detail"] = f"grad rel err {worst:.1e}, min E_mf - E_ed {gap:.3e}, radial flow residual {flow:.1e}"
