"""System maps, trajectories, periodic-point search, and the sampling-time
bound for flows."""

import math

import numpy as np
import pytest

import delayrecon as dr
from delayrecon.systems import (
    VECTOR_FIELDS,
    DomainError,
    periodic_return_scan,
    system_from_dict,
    system_to_dict,
    yorke_certificate,
    yorke_threshold,
)
from delayrecon.topology import grid_seeds

# Fixed points of the plane quadratic map with a=1.4, b=0.3: the roots of
# a x^2 + (1-b) x - 1 = 0, x* = ((b-1) +/- sqrt((1-b)^2 + 4a)) / (2a),
# checked against numpy.roots:
HENON_FIXED_X = (0.6313544770895047, -1.1313544770895046)

# Fixed-point counts of powers of the torus matrix [[1,1],[1,2]]:
# |det(M^p - I)| for p = 1..4.
CAT_FIXED_COUNTS = (1, 5, 16, 45)
# Points of minimal period <= n implied by the counts above.
CAT_CUMULATIVE = (1, 5, 20, 60)


class TestStepFormulas:
    def test_catmap_origin_fixed(self):
        assert np.array_equal(dr.CatMap().step(np.array([0.0, 0.0])), [0.0, 0.0])

    def test_rotation_step(self):
        rot = dr.CircleRotation(0.25)
        assert rot.step(np.array([0.9]))[0] == pytest.approx(0.15)

    def test_henon_fixed_points_closed_form(self):
        henon = dr.Henon()
        fps = henon.fixed_points()
        assert fps[:, 0] == pytest.approx(HENON_FIXED_X)
        for fp in fps:
            assert henon.step(fp) == pytest.approx(fp)

    def test_henon_injective_flag(self):
        assert dr.Henon().injective
        assert not dr.Henon(b=0.0).injective

    def test_odometer_add_with_carry(self):
        odo = dr.Odometer(base=3, digits=4)
        # state (2,2,0,0) scaled by 1/(base-1); adding one carries twice
        x = odo.encode(np.array([[2, 2, 0, 0]]))[0]
        y = odo.decode(odo.step(x)[None, :])[0]
        assert list(y) == [0, 0, 1, 0]

    def test_odometer_full_cycle_length(self):
        odo = dr.Odometer(base=3, digits=3)
        x0 = np.zeros(3)
        traj = dr.iterate(odo, x0, 3 ** 3 + 1)
        assert np.allclose(traj.states[-1], x0)
        # no earlier return
        returns = np.all(np.isclose(traj.states[1:-1], x0), axis=1)
        assert not returns.any()

    def test_domain_enforced(self):
        with pytest.raises(DomainError):
            dr.Henon().step(np.array([10.0, 0.0]))

    def test_dimension_enforced(self):
        with pytest.raises(DomainError):
            dr.CatMap().step(np.array([0.1]))


class TestTrajectory:
    def test_iterate_matches_repeated_step(self, henon):
        traj = dr.iterate(henon, np.array([0.1, 0.1]), 20)
        x = np.array([0.1, 0.1])
        for state in traj.states:
            assert np.array_equal(state, x)
            x = henon.step(x)

    def test_step_many_batch_agrees_with_single(self, henon):
        pts = np.random.default_rng(0).uniform(-0.5, 0.5, (40, 2))
        batch = henon.step_many(pts)
        singles = np.array([henon.step(p) for p in pts])
        assert np.array_equal(batch, singles)

    def test_length_one_allowed(self, henon):
        assert len(dr.iterate(henon, np.array([0.0, 0.0]), 1)) == 1

    def test_zero_length_rejected(self, henon):
        with pytest.raises(ValueError):
            dr.iterate(henon, np.array([0.0, 0.0]), 0)


class TestSampledFlow:
    def test_harmonic_is_a_rotation(self):
        flow = dr.SampledFlow("harmonic", dt=0.5)
        traj = dr.iterate(flow, np.array([0.5, 0.0]), 13)
        t = 0.5 * np.arange(13)
        exact = np.stack([0.5 * np.cos(t), -0.5 * np.sin(t)], axis=1)
        assert np.abs(traj.states - exact).max() < 1e-8

    def test_substep_halving_is_fourth_order(self):
        x0 = np.array([1.0, 0.0])
        coarse = dr.SampledFlow("harmonic", dt=1.0, substep=0.1).step(x0)
        fine = dr.SampledFlow("harmonic", dt=1.0, substep=0.05).step(x0)
        exact = np.array([math.cos(1.0), -math.sin(1.0)])
        err_c = np.linalg.norm(coarse - exact)
        err_f = np.linalg.norm(fine - exact)
        # classical RK4: halving the substep shrinks the error ~16x
        assert err_f < err_c / 8.0

    def test_lorenz_field_values(self):
        f = VECTOR_FIELDS["lorenz"]["field"]
        out = f(np.array([[1.0, 2.0, 3.0]]))[0]
        assert out == pytest.approx([10.0, 23.0, -6.0])

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError):
            dr.SampledFlow("pendulum", dt=0.1)


class TestFindPeriodic:
    def test_catmap_counts_match_matrix_oracle(self):
        cat = dr.CatMap()
        seeds = grid_seeds(cat, 400)
        for n, expect in zip(range(1, 5), CAT_CUMULATIVE):
            hits = dr.find_periodic(cat, n_max=n, tol=1e-9, seeds=seeds)
            assert len(hits) == expect

    def test_period_minimality_and_tolerance(self):
        cat = dr.CatMap()
        hits = dr.find_periodic(cat, n_max=3, tol=1e-9,
                                seeds=grid_seeds(cat, 200))
        for x, p in hits:
            assert cat.distance(cat.step_n(x[None, :], p)[0], x) <= 1e-9
            for q in range(1, p):
                assert cat.distance(cat.step_n(x[None, :], q)[0], x) > 1e-9

    def test_periodic_set_invariant_under_map(self):
        cat = dr.CatMap()
        hits = dr.find_periodic(cat, n_max=3, tol=1e-9,
                                seeds=grid_seeds(cat, 200))
        pts = np.array([x for x, _ in hits])
        for x, p in hits:
            y = cat.step(x)
            assert cat.distance(cat.step_n(y[None, :], p)[0], y) <= 1e-6
            assert min(cat.distance(y, q) for q in pts) <= 1e-6

    def test_henon_fixed_points_found(self, henon):
        seeds = grid_seeds(henon, 100)
        hits = dr.find_periodic(henon, n_max=1, tol=1e-9, seeds=seeds)
        got = sorted(x[0] for x, _ in hits)
        assert got == pytest.approx(sorted(HENON_FIXED_X))

    def test_irrational_rotation_has_none(self):
        rot = dr.CircleRotation(math.sqrt(2) - 1.0)
        hits = dr.find_periodic(rot, n_max=4, tol=1e-9,
                                seeds=grid_seeds(rot, 50))
        assert hits == []

    def test_deterministic_under_seed_shuffle(self):
        cat = dr.CatMap()
        seeds = grid_seeds(cat, 150)
        a = dr.find_periodic(cat, 2, 1e-9, seeds)
        b = dr.find_periodic(cat, 2, 1e-9, seeds[::-1])
        assert len(a) == len(b)
        for (xa, pa), (xb, pb) in zip(a, b):
            assert pa == pb
            assert cat.distance(xa, xb) <= 1e-7


class TestYorke:
    def test_threshold_formula(self):
        assert yorke_threshold(1.0, 1) == pytest.approx(math.pi)
        assert yorke_threshold(2.0, 3) == pytest.approx(math.pi / 6.0)

    def test_threshold_rejects_bad_input(self):
        with pytest.raises(ValueError):
            yorke_threshold(0.0, 1)
        with pytest.raises(ValueError):
            yorke_threshold(1.0, 0)

    def test_certificate_certifies_below_threshold(self):
        flow = dr.SampledFlow("harmonic", dt=3.0)
        cert = yorke_certificate(flow, 1)
        assert cert["certified"]
        assert cert["max_excluded_order"] == 2

    def test_certificate_refuses_above_threshold(self):
        flow = dr.SampledFlow("harmonic", dt=3.5)
        assert not yorke_certificate(flow, 1)["certified"]

    def test_equilibrium_scan_finds_origin(self):
        flow = dr.SampledFlow("harmonic", dt=0.5)
        cert = yorke_certificate(flow, 1,
                                 equilibrium_seeds=grid_seeds(flow, 64))
        assert len(cert["equilibria"]) == 1
        assert np.linalg.norm(cert["equilibria"][0]) < 1e-6

    def test_return_scan_quiet_when_certified(self):
        flow = dr.SampledFlow("harmonic", dt=3.0)
        hits = periodic_return_scan(flow, 2, 1e-6, grid_seeds(flow, 100))
        assert hits == []


class TestSerialization:
    @pytest.mark.parametrize(
        "sys_",
        [
            dr.Henon(a=1.2, b=0.25),
            dr.CatMap(),
            dr.CircleRotation(0.37),
            dr.Odometer(base=2, digits=5),
            dr.SampledFlow("harmonic", dt=0.25, substep=0.05),
        ],
    )
    def test_round_trip(self, sys_):
        back = system_from_dict(system_to_dict(sys_))
        assert back.system_id == sys_.system_id
        x = np.full(sys_.ambient_dim, 0.1)
        assert np.array_equal(back.step(x), sys_.step(x))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            system_from_dict({"kind": "standardmap"})
