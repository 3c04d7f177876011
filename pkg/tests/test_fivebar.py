import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as stn

from spectratact import (
    FiveBarConfig,
    GridSpec,
    JointAngles,
    SingularError,
    TerminalPose,
    UnreachableError,
    deviation_map,
    elbow_separation_ratio,
    forward_kinematics,
    inverse_kinematics,
    workspace_mask,
)
from spectratact.fivebar import reachable

CONFIG = FiveBarConfig(d_mm=80.0, l_mm=100.0)


def ik_oracle(d, l, x, y):
    """Direct evaluation of the joint-angle formulas, kept independent."""
    t1 = math.pi / 2 - math.atan2(y, x) - math.acos(math.hypot(x, y) / (2 * l))
    t2 = math.pi / 2 - math.atan2(y, d - x) - math.acos(math.hypot(d - x, y) / (2 * l))
    return t1, t2


def upper_mode_oracle(d, l, x, y, margin=0.0):
    """Independent check that a pose sits above its own elbow chord.

    The angle formulas are two-to-one (terminal above or below the chord
    reads the same angles); only the upper assembly mode is invertible.
    """
    t1, t2 = ik_oracle(d, l, x, y)
    elbow_mid_y = 0.5 * (l * math.cos(t1) + l * math.cos(t2))
    return y > elbow_mid_y + margin


def interior_grid(config, n=50, margin=1e-6):
    """Working-branch poses of an n x n grid over the workspace box."""
    limit = 2.0 * config.l_mm
    d, l = config.d_mm, config.l_mm
    xs = np.linspace(d / 2 - limit, d / 2 + limit, n)
    ys = np.linspace(1.0, limit, n)
    poses = []
    for y in ys:
        for x in xs:
            if reachable(config, float(x), float(y), margin=margin * l) and \
                    upper_mode_oracle(d, l, float(x), float(y), margin=margin * l):
                poses.append(TerminalPose(float(x), float(y)))
    return poses


class TestInverseKinematics:
    def test_symmetry_line_gives_equal_angles(self):
        angles = inverse_kinematics(CONFIG, TerminalPose(40.0, 120.0))
        assert angles.theta1_rad == angles.theta2_rad

    def test_fully_extended_pose(self):
        # distance to each base joint is exactly 2l: the acos terms vanish
        y = math.sqrt((2 * CONFIG.l_mm) ** 2 - 40.0**2)
        angles = inverse_kinematics(CONFIG, TerminalPose(40.0, y))
        expected = math.pi / 2 - math.atan2(y, 40.0)
        assert angles.theta1_rad == pytest.approx(expected, abs=1e-12)
        assert angles.theta2_rad == pytest.approx(expected, abs=1e-12)

    def test_direct_formula_oracle(self):
        pose = TerminalPose(40.0, math.sqrt(38400.0))
        angles = inverse_kinematics(CONFIG, pose)
        t1, t2 = ik_oracle(CONFIG.d_mm, CONFIG.l_mm, pose.x_mm, pose.y_mm)
        assert angles.theta1_rad == pytest.approx(t1, abs=1e-12)
        assert angles.theta2_rad == pytest.approx(t2, abs=1e-12)

    def test_unreachable_pose(self):
        with pytest.raises(UnreachableError):
            inverse_kinematics(CONFIG, TerminalPose(0.0, 201.0))

    def test_lower_half_plane_rejected(self):
        with pytest.raises(UnreachableError):
            inverse_kinematics(CONFIG, TerminalPose(40.0, -10.0))

    def test_base_joint_singular(self):
        with pytest.raises((SingularError, UnreachableError)):
            inverse_kinematics(CONFIG, TerminalPose(0.0, 0.0))


class TestForwardKinematics:
    def test_equal_angles_land_on_symmetry_line(self):
        pose = forward_kinematics(CONFIG, JointAngles(-0.4, -0.4))
        assert pose.x_mm == pytest.approx(CONFIG.d_mm / 2, abs=1e-12)

    def test_tangent_circles_meet_at_midpoint(self):
        # elbows exactly 2l apart: terminal at the chord midpoint
        theta = math.asin((CONFIG.d_mm - 2 * CONFIG.l_mm) / (2 * CONFIG.l_mm))
        pose = forward_kinematics(CONFIG, JointAngles(theta, theta))
        elbow_y = CONFIG.l_mm * math.cos(theta)
        assert pose.x_mm == pytest.approx(CONFIG.d_mm / 2, abs=1e-9)
        assert pose.y_mm == pytest.approx(elbow_y, abs=1e-9)

    def test_coincident_elbows_singular(self):
        theta = math.asin(CONFIG.d_mm / (2 * CONFIG.l_mm))
        with pytest.raises(SingularError):
            forward_kinematics(CONFIG, JointAngles(theta, theta))

    def test_no_intersection_unreachable(self):
        with pytest.raises(UnreachableError):
            forward_kinematics(CONFIG, JointAngles(-1.2, -1.2))


class TestRoundTrips:
    def test_fk_of_ik_over_interior_grid(self):
        worst = 0.0
        for pose in interior_grid(CONFIG, n=50):
            angles = inverse_kinematics(CONFIG, pose)
            back = forward_kinematics(CONFIG, angles)
            worst = max(worst, abs(back.x_mm - pose.x_mm), abs(back.y_mm - pose.y_mm))
        assert worst < 1e-9 * CONFIG.l_mm

    def test_ik_of_fk_over_interior_grid(self):
        worst = 0.0
        for pose in interior_grid(CONFIG, n=50):
            angles = inverse_kinematics(CONFIG, pose)
            again = inverse_kinematics(CONFIG, forward_kinematics(CONFIG, angles))
            worst = max(
                worst,
                abs(again.theta1_rad - angles.theta1_rad),
                abs(again.theta2_rad - angles.theta2_rad),
            )
        assert worst < 1e-9

    @settings(max_examples=80, deadline=None)
    @given(
        x=stn.floats(-100.0, 180.0),
        y=stn.floats(5.0, 195.0),
    )
    def test_round_trip_property(self, x, y):
        if not reachable(CONFIG, x, y, margin=1e-3 * CONFIG.l_mm):
            return
        if not upper_mode_oracle(CONFIG.d_mm, CONFIG.l_mm, x, y, margin=1e-3 * CONFIG.l_mm):
            return
        pose = TerminalPose(x, y)
        angles = inverse_kinematics(CONFIG, pose)
        back = forward_kinematics(CONFIG, angles)
        assert back.x_mm == pytest.approx(x, abs=1e-9 * CONFIG.l_mm)
        assert back.y_mm == pytest.approx(y, abs=1e-9 * CONFIG.l_mm)

    def test_mirror_symmetry_swaps_angles_exactly(self):
        # dyadic coordinates keep the reflection d - x itself exact, so
        # the swapped angles must agree bit for bit
        for x in np.arange(-80.0, 160.5, 2.5):
            for y in np.arange(20.0, 180.5, 10.0):
                if not reachable(CONFIG, float(x), float(y), margin=1.0):
                    continue
                pose = TerminalPose(float(x), float(y))
                mirrored = TerminalPose(CONFIG.d_mm - pose.x_mm, pose.y_mm)
                a = inverse_kinematics(CONFIG, pose)
                b = inverse_kinematics(CONFIG, mirrored)
                assert (a.theta1_rad, a.theta2_rad) == (b.theta2_rad, b.theta1_rad)


class TestWorkspaceMask:
    GRID = GridSpec(-130.0, 210.0, 0.5, 210.0, 35, 24)

    def test_point_near_baseline_reachable(self):
        assert reachable(CONFIG, CONFIG.d_mm / 2, 1e-3)

    def test_point_beyond_reach_masked_out(self):
        mask = workspace_mask(CONFIG, self.GRID)
        xs, ys = self.GRID.x_axis(), self.GRID.y_axis()
        for iy, y in enumerate(ys):
            for ix, x in enumerate(xs):
                if mask[iy, ix]:
                    assert math.hypot(x, y) < 2 * CONFIG.l_mm
                    assert math.hypot(CONFIG.d_mm - x, y) < 2 * CONFIG.l_mm

    def test_mask_symmetric_about_centerline(self):
        # grid chosen symmetric about x = d/2 = 40
        grid = GridSpec(40.0 - 150.0, 40.0 + 150.0, 1.0, 200.0, 31, 21)
        mask = workspace_mask(CONFIG, grid)
        assert np.array_equal(mask, mask[:, ::-1])


class TestDeviationMap:
    GRID = GridSpec(0.0, 80.0, 60.0, 150.0, 9, 10)

    def test_zero_sigma_gives_zero_everywhere(self):
        out = deviation_map(CONFIG, 0.0, self.GRID, method="jacobian")
        finite = out[np.isfinite(out)]
        assert finite.size > 0 and np.all(finite == 0.0)
        out_mc = deviation_map(CONFIG, 0.0, self.GRID, method="monte_carlo", n_trials=50)
        finite = out_mc[np.isfinite(out_mc)]
        assert np.all(finite == 0.0)

    def test_linear_scaling_in_sigma(self):
        a = deviation_map(CONFIG, 0.02, self.GRID, method="jacobian")
        b = deviation_map(CONFIG, 0.04, self.GRID, method="jacobian")
        finite = np.isfinite(a)
        assert np.allclose(b[finite], 2.0 * a[finite], rtol=1e-6)

    def test_monte_carlo_matches_jacobian_where_well_conditioned(self):
        jac = deviation_map(CONFIG, 0.04, self.GRID, method="jacobian")
        mc = deviation_map(CONFIG, 0.04, self.GRID, seed=3, method="monte_carlo",
                           n_trials=4000)
        xs, ys = self.GRID.x_axis(), self.GRID.y_axis()
        checked = 0
        for iy, y in enumerate(ys):
            for ix, x in enumerate(xs):
                if not (np.isfinite(jac[iy, ix]) and np.isfinite(mc[iy, ix])):
                    continue
                if elbow_separation_ratio(CONFIG, TerminalPose(float(x), float(y))) > 0.9:
                    continue
                assert mc[iy, ix] == pytest.approx(jac[iy, ix], rel=0.10)
                checked += 1
        assert checked >= 20

    def test_max_location_against_monte_carlo_oracle(self):
        # restricted to a well-conditioned box so the maximum is stable
        box = GridSpec(25.0, 55.0, 95.0, 145.0, 7, 11)
        jac = deviation_map(CONFIG, 0.04, box, method="jacobian")
        oracle = deviation_map(CONFIG, 0.04, box, seed=5, method="monte_carlo",
                               n_trials=10000)
        assert np.unravel_index(np.nanargmax(jac), jac.shape) == \
            np.unravel_index(np.nanargmax(oracle), oracle.shape)
        assert np.nanmax(oracle) == pytest.approx(np.nanmax(jac), rel=0.05)

    def test_unreachable_cells_flagged_not_raised(self):
        grid = GridSpec(-300.0, -210.0, 1.0, 50.0, 4, 4)
        out = deviation_map(CONFIG, 0.04, grid, method="jacobian")
        assert np.all(np.isnan(out))

    def test_monte_carlo_deterministic_under_seed(self):
        grid = GridSpec(20.0, 60.0, 90.0, 130.0, 4, 4)
        a = deviation_map(CONFIG, 0.04, grid, seed=9, method="monte_carlo", n_trials=200)
        b = deviation_map(CONFIG, 0.04, grid, seed=9, method="monte_carlo", n_trials=200)
        assert np.array_equal(a, b, equal_nan=True)

    def test_workers_do_not_change_output(self):
        a = deviation_map(CONFIG, 0.04, self.GRID, seed=2, method="monte_carlo",
                          n_trials=100, workers=1)
        b = deviation_map(CONFIG, 0.04, self.GRID, seed=2, method="monte_carlo",
                          n_trials=100, workers=4)
        assert np.array_equal(a, b, equal_nan=True)


class TestWorkingBranch:
    def test_two_to_one_fold(self):
        # both circle intersections read the same joint angles; only the
        # upper one is recovered by forward kinematics
        from spectratact import working_branch

        upper = TerminalPose(40.0, 120.0)
        angles = inverse_kinematics(CONFIG, upper)
        lower = TerminalPose(40.0, 48.98979485566356)
        twin_angles = inverse_kinematics(CONFIG, lower)
        assert angles.theta1_rad == pytest.approx(twin_angles.theta1_rad, abs=1e-9)
        assert working_branch(CONFIG, upper)
        assert not working_branch(CONFIG, lower)
        back = forward_kinematics(CONFIG, twin_angles)
        assert back.y_mm == pytest.approx(upper.y_mm, abs=1e-6)

    def test_matches_independent_oracle_on_grid(self):
        from spectratact import working_branch

        for y in (20.0, 60.0, 90.0, 150.0):
            for x in (-40.0, 0.0, 40.0, 120.0):
                if not reachable(CONFIG, x, y, margin=1.0):
                    continue
                expected = upper_mode_oracle(CONFIG.d_mm, CONFIG.l_mm, x, y)
                assert working_branch(CONFIG, TerminalPose(x, y)) == expected


class TestConfigValidation:
    def test_rejects_bad_geometry(self):
        with pytest.raises(ValueError):
            FiveBarConfig(d_mm=0.0, l_mm=100.0)
        with pytest.raises(ValueError):
            FiveBarConfig(d_mm=80.0, l_mm=0.0)
        with pytest.raises(ValueError):
            FiveBarConfig(d_mm=500.0, l_mm=100.0)

    def test_angles_must_be_finite(self):
        with pytest.raises(ValueError):
            JointAngles(math.nan, 0.0)
