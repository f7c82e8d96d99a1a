"""Per-sample lighting and fog randomization.

An overlay is a new Scene object sharing all geometry arrays with the
base scene; only `lights` and `fog` are replaced.
"""

from __future__ import annotations

import colorsys
import dataclasses
from dataclasses import dataclass

import numpy as np

from .geometry import normalize, sample_direction_in_cone


@dataclass(frozen=True)
class Light:
    """Directional or point light; `direction` is the travel direction of the light."""

    kind: str = "directional"               # "directional" | "point"
    direction: tuple[float, float, float] | None = (0.0, 0.0, -1.0)
    position: tuple[float, float, float] | None = None
    color: tuple[float, float, float] = (1.0, 1.0, 1.0)
    intensity: float = 1.0

    def __post_init__(self):
        if self.kind not in ("directional", "point"):
            raise ValueError(f"unknown light kind {self.kind!r}")
        if self.kind == "directional":
            if self.direction is None:
                raise ValueError("directional light needs a direction")
            object.__setattr__(self, "direction", tuple(normalize(np.asarray(self.direction))))
        elif self.position is None:
            raise ValueError("point light needs a position")
        if any(not 0.0 <= c <= 1.0 for c in self.color):
            raise ValueError("light color channels must be in [0, 1]")
        if self.intensity < 0:
            raise ValueError("light intensity must be >= 0")


@dataclass(frozen=True)
class FogParams:
    """Exponential distance fog: blend factor 1 - exp(-density * distance)."""

    density: float = 0.0                    # per world unit
    color: tuple[float, float, float] = (0.7, 0.75, 0.8)

    def __post_init__(self):
        if not np.isfinite(self.density) or self.density < 0:
            raise ValueError("fog density must be finite and >= 0")


@dataclass(frozen=True)
class EnvRanges:
    """Sampling intervals for randomize_environment.

    Defaults produce visibly distinct but legible renders; every field is
    config-exposed. Degenerate (single-point) intervals disable that axis.
    """

    intensity_mult: tuple[float, float] = (0.3, 3.0)
    hue_jitter: float = np.deg2rad(30.0)        # +- range, radians of hue angle
    saturation_jitter: float = 0.3              # +- range
    direction_cone: float = np.deg2rad(30.0)    # half-angle for directional lights
    fog_density: tuple[float, float] = (0.0, 0.05)
    per_n_images: int = 1                       # redraw environment every n images

    def __post_init__(self):
        if self.intensity_mult[0] > self.intensity_mult[1] or self.intensity_mult[0] < 0:
            raise ValueError("bad intensity interval")
        if self.fog_density[0] > self.fog_density[1] or self.fog_density[0] < 0:
            raise ValueError("bad fog density interval")
        if not 0 <= self.saturation_jitter <= 1:
            raise ValueError("saturation jitter must be in [0, 1]")
        if self.per_n_images < 1:
            raise ValueError("per_n_images must be >= 1")


def jitter_color(color, hue_jitter: float, sat_jitter: float, rng: np.random.Generator):
    """Jitter hue (wrapping) and saturation (clipped) in HSV space."""
    h, s, v = colorsys.rgb_to_hsv(*[float(c) for c in color])
    if hue_jitter > 0:
        h = (h + rng.uniform(-hue_jitter, hue_jitter) / (2.0 * np.pi)) % 1.0
    if sat_jitter > 0:
        s = float(np.clip(s + rng.uniform(-sat_jitter, sat_jitter), 0.0, 1.0))
    r, g, b = colorsys.hsv_to_rgb(h, s, v)
    return (float(np.clip(r, 0, 1)), float(np.clip(g, 0, 1)), float(np.clip(b, 0, 1)))


def randomize_environment(scene, ranges: EnvRanges, rng: np.random.Generator):
    """Return a scene overlay with randomized lights and fog; geometry is shared.

    Every light's intensity is scaled by a draw from the multiplier
    interval, its color jittered in hue/saturation, and directional
    lights are rotated uniformly within the configured cone. Fog density
    is drawn from its interval.
    """
    if not scene.lights:
        raise ValueError("scene has no lights to randomize")
    new_lights = []
    for light in scene.lights:
        mult = rng.uniform(*ranges.intensity_mult)
        color = jitter_color(light.color, ranges.hue_jitter, ranges.saturation_jitter, rng)
        if light.kind == "directional" and ranges.direction_cone > 0:
            direction = tuple(sample_direction_in_cone(np.asarray(light.direction), ranges.direction_cone, rng))
        else:
            direction = light.direction
        new_lights.append(
            dataclasses.replace(
                light,
                intensity=light.intensity * mult,
                color=color,
                direction=direction,
            )
        )
    fog = FogParams(density=rng.uniform(*ranges.fog_density), color=scene.fog.color)
    return dataclasses.replace(scene, lights=new_lights, fog=fog)
