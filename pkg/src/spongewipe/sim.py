"""Quasi-static compliant-contact simulator for a sponge on a stick.

The end-effector is position controlled and teleports to each commanded pose.
Contact is a nonlinear stiffening spring with rate damping:

    fz = -[k * delta * (1 + (delta/d)^2) + k*d * delta_dot]   (clamped <= 0)

where `delta` is sponge compression, `k` the contact stiffness and `d` the
compliance width (smaller d -> sharper stiffening; damping c = k*d).  Lateral
friction is regularized Coulomb, f = -mu*|fz| * v/(|v|+eps), and the lateral
forces couple into tx/ty through the compressed sponge thickness.  Gaussian
sensor noise is added per sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .rng import Rng

FORCE_HARD_CAP = 100.0  # N; |fz| beyond this raises an overload fault

MU_RANGE = (0.0, 3.5)
K_RANGE = (0.5, 1000.0)
D_RANGE = (0.02, 0.3)
DEFAULT_REST_THICKNESS = 0.03

EXPLORE_PRESS_SPEED = 0.01   # m/s, 2 s downward
EXPLORE_LATERAL_SPEED = 0.05  # m/s, 1 s left then 1 s right
EXPLORE_RATE_HZ = 100.0
EXPLORE_SAMPLES = 400


class OverloadFault(RuntimeError):
    """Vertical force exceeded the hard sensor cap; episode must abort."""


@dataclass(frozen=True)
class SpongeParams:
    mu: float
    k: float
    d: float
    rest_thickness: float = DEFAULT_REST_THICKNESS
    name: str = ""

    def __post_init__(self):
        if not MU_RANGE[0] <= self.mu <= MU_RANGE[1]:
            raise ValueError(f"mu out of range: {self.mu}")
        if not K_RANGE[0] <= self.k <= K_RANGE[1]:
            raise ValueError(f"k out of range: {self.k}")
        if not D_RANGE[0] <= self.d <= D_RANGE[1]:
            raise ValueError(f"d out of range: {self.d}")
        if self.rest_thickness <= 0:
            raise ValueError("rest_thickness must be positive")


@dataclass(frozen=True)
class SurfaceProfile:
    """Height field z(x, y).  `wall` profiles are handled in surface-local
    coordinates by the controllers; here they still expose a height function
    along the wall normal."""

    kind: str = "flat"  # flat | sloped | wall
    base_height: float = 0.0
    gradient: tuple = (0.0, 0.0)
    wall_offset: float = 0.0

    def height(self, x: float, y: float) -> float:
        if self.kind == "flat" or self.kind == "wall":
            return self.base_height
        if self.kind == "sloped":
            return self.base_height + self.gradient[0] * x + self.gradient[1] * y
        raise ValueError(f"unknown surface kind {self.kind!r}")


def surface_height(profile: SurfaceProfile, x: float, y: float) -> float:
    return profile.height(x, y)


@dataclass(frozen=True)
class EEState:
    position: tuple  # (x, y, z) in metres
    frame: str = "table"  # table | wall


@dataclass(frozen=True)
class FTSample:
    fx: float
    fy: float
    fz: float
    tx: float
    ty: float
    tz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.fz, self.tx, self.ty, self.tz])


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    noise_sigma_force: float = 0.05
    noise_sigma_torque: float = 0.002
    friction_reg_eps: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.noise_sigma_force < 0 or self.noise_sigma_torque < 0:
            raise ValueError("noise sigmas must be non-negative")


def contact_force(params: SpongeParams, penetration: float,
                  penetration_rate: float, v_lateral, cfg: SimConfig,
                  rng: Rng | None = None) -> FTSample:
    """FT sample for a given contact state; `rng=None` disables noise."""
    if penetration < 0:
        raise ValueError("penetration must be non-negative")
    vx, vy = v_lateral
    if penetration == 0.0:
        fx = fy = fz = tx = ty = tz = 0.0
    else:
        spring = params.k * penetration * (1.0 + (penetration / params.d) ** 2)
        damping = params.k * params.d * penetration_rate
        fz = -max(spring + damping, 0.0)
        speed = float(np.hypot(vx, vy))
        scale = -params.mu * abs(fz) / (speed + cfg.friction_reg_eps)
        fx = scale * vx
        fy = scale * vy
        h_c = max(params.rest_thickness - penetration, 0.0)
        tx = fy * h_c
        ty = -fx * h_c
        tz = 0.0
    if rng is not None:
        nf = rng.normal(0.0, cfg.noise_sigma_force, 3)
        nt = rng.normal(0.0, cfg.noise_sigma_torque, 3)
        fx, fy, fz = fx + nf[0], fy + nf[1], fz + nf[2]
        tx, ty, tz = tx + nt[0], ty + nt[1], tz + nt[2]
    if abs(fz) > FORCE_HARD_CAP:
        raise OverloadFault(f"|fz| = {abs(fz):.1f} N exceeds {FORCE_HARD_CAP} N")
    return FTSample(fx, fy, fz, tx, ty, tz)


class SpongeSim:
    """Owns one end-effector + sponge + surface; single-threaded."""

    def __init__(self, params: SpongeParams, profile: SurfaceProfile,
                 cfg: SimConfig, rng: Rng | None = None):
        self.params = params
        self.profile = profile
        self.cfg = cfg
        self.rng = rng if rng is not None else Rng(cfg.seed)
        self._prev = None  # (x, y, penetration)

    def reset(self):
        self._prev = None

    def touch_height(self, x: float, y: float) -> float:
        """z at which the sponge just touches the surface."""
        return self.profile.height(x, y) + self.params.rest_thickness

    def penetration_at(self, x: float, y: float, z: float) -> float:
        return max(
            0.0, self.params.rest_thickness - (z - self.profile.height(x, y))
        )

    def step(self, commanded: EEState) -> FTSample:
        x, y, z = commanded.position
        pen = self.penetration_at(x, y, z)
        if self._prev is None:
            rate, v_lat = 0.0, (0.0, 0.0)
        else:
            px, py, ppen = self._prev
            dt = self.cfg.dt
            rate = (pen - ppen) / dt
            v_lat = ((x - px) / dt, (y - py) / dt)
        self._prev = (x, y, pen)
        return contact_force(self.params, pen, rate, v_lat, self.cfg, self.rng)


def run_exploratory(params: SpongeParams, profile: SurfaceProfile,
                    cfg: SimConfig, rng: Rng | None = None,
                    origin=(0.0, 0.0)) -> np.ndarray:
    """Scripted probe: press 2 s at 0.01 m/s, slide left 1 s then right 1 s at
    0.05 m/s, sampling FT at 100 Hz -> a 400x6 trajectory."""
    cfg = replace(cfg, dt=1.0 / EXPLORE_RATE_HZ)
    sim = SpongeSim(params, profile, cfg, rng)
    x0, y0 = origin
    z0 = sim.touch_height(x0, y0)
    dt = cfg.dt
    samples = np.empty((EXPLORE_SAMPLES, 6))
    x, y, z = x0, y0, z0
    for i in range(EXPLORE_SAMPLES):
        t = (i + 1) * dt
        if t <= 2.0:
            z = z0 - EXPLORE_PRESS_SPEED * t
        elif t <= 3.0:
            x = x0 - EXPLORE_LATERAL_SPEED * (t - 2.0)
        else:
            x = (x0 - EXPLORE_LATERAL_SPEED) + EXPLORE_LATERAL_SPEED * (t - 3.0)
        samples[i] = sim.step(EEState((x, y, z))).as_array()
    return samples


def sample_randomized_params(rng: Rng) -> SpongeParams:
    """Domain randomization draw: mu uniform, k log-uniform, d uniform."""
    return SpongeParams(
        mu=float(rng.uniform(*MU_RANGE)),
        k=float(rng.loguniform(*K_RANGE)),
        d=float(rng.uniform(*D_RANGE)),
        rest_thickness=DEFAULT_REST_THICKNESS,
        name="randomized",
    )


GRID_STIFFNESS = {1: 150.0, 2: 400.0, 3: 800.0}
GRID_FRICTION = {1: 0.5, 2: 1.2, 3: 2.5}
NORMAL_SPONGE = SpongeParams(mu=1.0, k=300.0, d=0.1, name="normal")


def make_sponge_grid():
    """The ten evaluation sponges: 'normal' plus s{1..3}f{1..3}."""
    sponges = [NORMAL_SPONGE]
    for s in (1, 2, 3):
        for f in (1, 2, 3):
            sponges.append(
                SpongeParams(
                    mu=GRID_FRICTION[f],
                    k=GRID_STIFFNESS[s],
                    d=0.1,
                    name=f"s{s}f{f}",
                )
            )
    return sponges
