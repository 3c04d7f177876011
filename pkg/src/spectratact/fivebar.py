"""Planar five-bar (2-DOF) parallel mechanism kinematics.

Joint 1 sits at the origin, Joint 2 at (d, 0); all four moving links
share length l.  Joint angles are measured from the +y vertical, turning
toward +x, so a proximal link at angle theta points along
(sin theta, cos theta).  The terminal works in the upper half-plane on
the elbow-up branch (circle intersection with the larger y).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import SingularError, UnreachableError

REACH_REL_TOL = 1e-9


@dataclass(frozen=True)
class FiveBarConfig:
    """Linkage geometry: base joint separation d and common bar length l."""

    d_mm: float = 80.0
    l_mm: float = 100.0

    def __post_init__(self):
        if not self.d_mm > 0:
            raise ValueError("d_mm must be > 0")
        if not self.l_mm > 0:
            raise ValueError("l_mm must be > 0")
        if not self.d_mm < 4 * self.l_mm:
            raise ValueError("need d < 4l for a nonempty workspace")

    def to_dict(self) -> dict:
        return {"d_mm": self.d_mm, "l_mm": self.l_mm}

    @classmethod
    def from_dict(cls, doc: dict) -> "FiveBarConfig":
        return cls(float(doc.get("d_mm", 80.0)), float(doc.get("l_mm", 100.0)))


@dataclass(frozen=True)
class JointAngles:
    theta1_rad: float
    theta2_rad: float

    def __post_init__(self):
        if not (math.isfinite(self.theta1_rad) and math.isfinite(self.theta2_rad)):
            raise ValueError("joint angles must be finite")


@dataclass(frozen=True)
class TerminalPose:
    x_mm: float
    y_mm: float


def inverse_kinematics(config: FiveBarConfig, pose: TerminalPose) -> JointAngles:
    """Joint angles reaching a terminal pose on the working branch.

    theta_i = pi/2 - atan2(y, xi) - acos(ri / 2l) with x1 = x, x2 = d - x;
    acos arguments within REACH_REL_TOL of 1 are clamped, beyond that the
    pose is unreachable.
    """
    x, y, d, l = pose.x_mm, pose.y_mm, config.d_mm, config.l_mm
    if y <= 0:
        raise UnreachableError(f"pose y={y} mm outside the working half-plane (y > 0)")
    r1 = math.hypot(x, y)
    r2 = math.hypot(d - x, y)
    if r1 == 0 or r2 == 0:
        raise SingularError("pose coincides with a base joint")
    angles = []
    for r, xi in ((r1, x), (r2, d - x)):
        ratio = r / (2.0 * l)
        if ratio > 1.0 + REACH_REL_TOL:
            raise UnreachableError(
                f"pose ({x:g}, {y:g}) mm beyond reach: distance {r:g} > 2l = {2 * l:g}"
            )
        angles.append(math.pi / 2 - math.atan2(y, xi) - math.acos(min(ratio, 1.0)))
    return JointAngles(angles[0], angles[1])


def _elbows(config: FiveBarConfig, angles: JointAngles):
    l, d = config.l_mm, config.d_mm
    e1 = (l * math.sin(angles.theta1_rad), l * math.cos(angles.theta1_rad))
    e2 = (d - l * math.sin(angles.theta2_rad), l * math.cos(angles.theta2_rad))
    return e1, e2


def forward_kinematics(config: FiveBarConfig, angles: JointAngles) -> TerminalPose:
    """Terminal pose for joint angles, elbow-up branch.

    Intersects the two circles of radius l around the elbow points and
    keeps the intersection with the larger y.
    """
    l = config.l_mm
    (e1x, e1y), (e2x, e2y) = _elbows(config, angles)
    dx, dy = e2x - e1x, e2y - e1y
    q = math.hypot(dx, dy)
    if q <= REACH_REL_TOL * l:
        raise SingularError("coincident elbows: terminal branch undefined")
    if q > 2.0 * l * (1.0 + REACH_REL_TOL):
        raise UnreachableError(
            f"elbow separation {q:g} mm exceeds 2l = {2 * l:g} mm; no intersection"
        )
    half = 0.5 * q
    h = math.sqrt(max(l * l - half * half, 0.0))
    mx, my = 0.5 * (e1x + e2x), 0.5 * (e1y + e2y)
    # unit normal to the elbow chord; +/- h along it gives the two branches
    nx, ny = -dy / q, dx / q
    cand = ((mx + h * nx, my + h * ny), (mx - h * nx, my - h * ny))
    x, y = max(cand, key=lambda p: p[1])
    return TerminalPose(x, y)


def _fk_batch(config: FiveBarConfig, theta1, theta2):
    """Vectorized elbow-up forward kinematics.

    Returns (x, y, valid); invalid entries (no intersection or coincident
    elbows) carry NaN coordinates.
    """
    l, d = config.l_mm, config.d_mm
    t1 = np.asarray(theta1, dtype=float)
    t2 = np.asarray(theta2, dtype=float)
    e1x, e1y = l * np.sin(t1), l * np.cos(t1)
    e2x, e2y = d - l * np.sin(t2), l * np.cos(t2)
    dx, dy = e2x - e1x, e2y - e1y
    q = np.hypot(dx, dy)
    valid = (q > REACH_REL_TOL * l) & (q <= 2.0 * l * (1.0 + REACH_REL_TOL))
    q_safe = np.where(valid, q, 1.0)
    h = np.sqrt(np.maximum(l * l - 0.25 * q_safe * q_safe, 0.0))
    mx, my = 0.5 * (e1x + e2x), 0.5 * (e1y + e2y)
    nx, ny = -dy / q_safe, dx / q_safe
    ya, yb = my + h * ny, my - h * ny
    up = ya >= yb
    x = np.where(up, mx + h * nx, mx - h * nx)
    y = np.where(up, ya, yb)
    x = np.where(valid, x, np.nan)
    y = np.where(valid, y, np.nan)
    return x, y, valid


@dataclass(frozen=True)
class GridSpec:
    """Rectangular evaluation grid over the working plane."""

    x_min_mm: float
    x_max_mm: float
    y_min_mm: float
    y_max_mm: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.x_max_mm > self.x_min_mm and self.y_max_mm > self.y_min_mm):
            raise ValueError("grid extents must be nonempty")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell per axis")

    def x_axis(self) -> np.ndarray:
        return np.linspace(self.x_min_mm, self.x_max_mm, self.nx)

    def y_axis(self) -> np.ndarray:
        return np.linspace(self.y_min_mm, self.y_max_mm, self.ny)

    def to_dict(self) -> dict:
        return {
            "x_min_mm": self.x_min_mm, "x_max_mm": self.x_max_mm,
            "y_min_mm": self.y_min_mm, "y_max_mm": self.y_max_mm,
            "nx": self.nx, "ny": self.ny,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GridSpec":
        return cls(
            float(doc["x_min_mm"]), float(doc["x_max_mm"]),
            float(doc["y_min_mm"]), float(doc["y_max_mm"]),
            int(doc["nx"]), int(doc["ny"]),
        )


def reachable(config: FiveBarConfig, x_mm: float, y_mm: float, margin: float = 0.0) -> bool:
    """Strict interior reachability of a point in the working half-plane."""
    limit = 2.0 * config.l_mm - margin
    return (
        y_mm > 0
        and math.hypot(x_mm, y_mm) < limit
        and math.hypot(config.d_mm - x_mm, y_mm) < limit
    )


def workspace_mask(config: FiveBarConfig, grid: GridSpec) -> np.ndarray:
    """Boolean [ny, nx] grid: True where the pose is strictly reachable."""
    xs = grid.x_axis()[None, :]
    ys = grid.y_axis()[:, None]
    limit = 2.0 * config.l_mm
    r1 = np.hypot(xs, ys)
    r2 = np.hypot(config.d_mm - xs, ys)
    return (ys > 0) & (r1 < limit) & (r2 < limit)


def elbow_separation_ratio(config: FiveBarConfig, pose: TerminalPose) -> float:
    """Elbow separation over its tangent limit 2l, as a conditioning gauge.

    The forward map degenerates as this approaches 1 (passive links
    colinear); first-order error propagation is trustworthy well below it.
    """
    angles = inverse_kinematics(config, pose)
    (e1x, e1y), (e2x, e2y) = _elbows(config, angles)
    return math.hypot(e2x - e1x, e2y - e1y) / (2.0 * config.l_mm)


def working_branch(config: FiveBarConfig, pose: TerminalPose, margin_mm: float = 0.0) -> bool:
    """True when a pose lies on the elbow-up assembly mode.

    The joint-angle formulas are two-to-one: the passive links can
    assemble with the terminal on either side of the elbow chord, and
    both assemblies read the same encoder angles.  Forward kinematics
    resolves to the upper side, so only poses strictly above the chord
    (equivalently above the elbow midpoint) round-trip; the fold line
    between the modes is the tangent singularity.
    """
    try:
        angles = inverse_kinematics(config, pose)
    except (UnreachableError, SingularError):
        return False
    (e1x, e1y), (e2x, e2y) = _elbows(config, angles)
    return pose.y_mm > 0.5 * (e1y + e2y) + margin_mm


def fk_jacobian(config: FiveBarConfig, angles: JointAngles, step_rad: float = 1e-6) -> np.ndarray:
    """Terminal-position Jacobian d(x,y)/d(theta1,theta2), central differences."""
    jac = np.empty((2, 2))
    for i in range(2):
        delta = [0.0, 0.0]
        delta[i] = step_rad
        hi = forward_kinematics(config, JointAngles(angles.theta1_rad + delta[0],
                                                    angles.theta2_rad + delta[1]))
        lo = forward_kinematics(config, JointAngles(angles.theta1_rad - delta[0],
                                                    angles.theta2_rad - delta[1]))
        jac[0, i] = (hi.x_mm - lo.x_mm) / (2 * step_rad)
        jac[1, i] = (hi.y_mm - lo.y_mm) / (2 * step_rad)
    return jac


def _max_workers(explicit: int | None = None) -> int:
    if explicit is not None:
        return max(1, int(explicit))
    env = os.environ.get("SPECTRATACT_THREADS")
    return max(1, int(env)) if env else 1


def deviation_map(
    config: FiveBarConfig,
    angle_sigma_deg: float,
    grid: GridSpec,
    seed: int = 0,
    method: str = "jacobian",
    n_trials: int = 300,
    workers: int | None = None,
) -> np.ndarray:
    """Per-cell 1-sigma terminal deviation under independent angle noise.

    Jacobian method: sigma * Frobenius norm of the FK Jacobian.  Monte
    Carlo method: RMS radial deviation over ``n_trials`` perturbed angle
    pairs, with a per-cell RNG substream derived from (seed, cell index).
    Unreachable, singular or lower-assembly-mode cells are NaN, never
    raised.
    """
    if not angle_sigma_deg >= 0:
        raise ValueError("angle_sigma_deg must be >= 0")
    if method not in ("jacobian", "monte_carlo"):
        raise ValueError(f"unknown method {method!r}")
    sigma_rad = math.radians(angle_sigma_deg)
    xs, ys = grid.x_axis(), grid.y_axis()
    out = np.full((grid.ny, grid.nx), np.nan)
    streams = np.random.SeedSequence(seed).spawn(grid.ny * grid.nx)

    def fill_row(iy: int) -> None:
        y = float(ys[iy])
        for ix in range(grid.nx):
            x = float(xs[ix])
            pose = TerminalPose(x, y)
            if not reachable(config, x, y, margin=REACH_REL_TOL * config.l_mm):
                continue
            if not working_branch(config, pose):
                continue
            try:
                angles = inverse_kinematics(config, pose)
            except (UnreachableError, SingularError):
                continue
            if method == "jacobian":
                try:
                    jac = fk_jacobian(config, angles)
                except (UnreachableError, SingularError):
                    continue
                out[iy, ix] = sigma_rad * float(np.sqrt(np.sum(jac * jac)))
            else:
                try:
                    base = forward_kinematics(config, angles)
                except (UnreachableError, SingularError):
                    continue
                rng = np.random.default_rng(streams[iy * grid.nx + ix])
                noise = rng.standard_normal((n_trials, 2)) * sigma_rad
                px, py, valid = _fk_batch(
                    config, angles.theta1_rad + noise[:, 0], angles.theta2_rad + noise[:, 1]
                )
                if valid.sum() < n_trials / 2:
                    continue
                dev2 = (px[valid] - base.x_mm) ** 2 + (py[valid] - base.y_mm) ** 2
                out[iy, ix] = float(np.sqrt(dev2.mean()))

    n_workers = _max_workers(workers)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(fill_row, range(grid.ny)))
    else:
        for iy in range(grid.ny):
            fill_row(iy)
    return out
