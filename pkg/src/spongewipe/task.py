"""Wiping-task geometry shared by the expert, the controllers and evaluation.

The demonstration surface is an inclined board: height 0.2*x over a path that
runs x from -0.18 m to +0.18 m (25 steps at 2.5 Hz) while y sweeps a
serpentine between +/-0.05 m.  Evaluation surfaces are defined relative to
that incline:

    low     flat, 3 cm below the incline's lowest point under the path
    high    flat, 1.5 cm above the incline's lowest point
    sloped  rotated ~5 deg shallower than the incline about the path centre,
            lowered by 1.5 cm
    wall    vertical surface; simulated flat in wall-local coordinates, with
            commands and FT mapped through the x/z axis swap

An open-loop replay of the demonstrated absolute z profile digs in near the
path start and loses contact past mid-path on `high` and `sloped`, and never
touches `low`; the feedback controllers have to track instead.
"""

from __future__ import annotations

import numpy as np

from .sim import SurfaceProfile

PATH_STEPS = 25
STEP_PERIOD = 0.4  # s (2.5 Hz)
PATH_X = (-0.18, 0.18)
PATH_Y_AMPLITUDE = 0.05
PATH_Y_CYCLES = 2.0

DEMO_GRADIENT = 0.2  # demo incline dz/dx
_DEMO_MIN = DEMO_GRADIENT * PATH_X[0]  # incline's lowest point under the path

HEIGHT_NAMES = ("low", "high", "sloped", "wall")

DEMO_PROFILE = SurfaceProfile(kind="sloped", base_height=0.0,
                              gradient=(DEMO_GRADIENT, 0.0))

EVAL_PROFILES = {
    "low": SurfaceProfile(kind="flat", base_height=_DEMO_MIN - 0.03),
    "high": SurfaceProfile(kind="flat", base_height=_DEMO_MIN + 0.015),
    "sloped": SurfaceProfile(kind="sloped", base_height=-0.015,
                             gradient=(0.1125, 0.0)),
    "wall": SurfaceProfile(kind="wall", base_height=_DEMO_MIN - 0.006,
                           wall_offset=0.40),
}


def profile_for(name: str) -> SurfaceProfile:
    if name == "demo":
        return DEMO_PROFILE
    try:
        return EVAL_PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown surface name {name!r}") from None


def wiping_path(phase: float = 0.0) -> np.ndarray:
    """The 25x2 (x, y) sweep; `phase` jitters the serpentine slightly."""
    t = np.arange(PATH_STEPS)
    x = np.linspace(PATH_X[0], PATH_X[1], PATH_STEPS)
    y = PATH_Y_AMPLITUDE * np.sin(
        2.0 * np.pi * PATH_Y_CYCLES * t / (PATH_STEPS - 1) + phase
    )
    return np.column_stack([x, y])
