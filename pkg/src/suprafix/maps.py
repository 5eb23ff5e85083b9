"""Self-maps on suprametric spaces.

Maps act on batches: a finite-space map takes an integer index array, an
interval map takes a float array, a function-space operator takes an array
whose last axis is the grid.  Scalars work as batches of size one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import kexpr
from .space import DomainError, FiniteSpace, IntervalSpace, SpaceError


@dataclass(frozen=True)
class SelfMap:
    space: object
    func: Callable
    name: str = "T"
    spec: dict = field(default_factory=dict, repr=False, compare=False)

    def __call__(self, p):
        return self.func(p)

    def apply_checked(self, p):
        """Apply once and raise :class:`DomainError` if any image leaves the space."""
        image = self.func(p)
        if not self.space.contains(image):
            bad = _first_outside(self.space, p, image)
            raise DomainError(f"{self.name} maps {bad[0]!r} to {bad[1]!r}, outside the space", bad[0])
        return image

    def power(self, p, n: int, check: bool = True):
        for _ in range(n):
            p = self.apply_checked(p) if check else self.func(p)
        return p

    def orbit(self, p, n: int, check: bool = True) -> list:
        """``[p, Tp, ..., T^n p]``."""
        out = [p]
        for _ in range(n):
            p = self.apply_checked(p) if check else self.func(p)
            out.append(p)
        return out

    def displacement(self, p):
        """``d(p, Tp)``, zero exactly at fixed points."""
        return self.space.distance(p, self.func(p))

    @classmethod
    def finite(cls, space: FiniteSpace, images: dict[str, str], name: str = "T") -> "SelfMap":
        missing = [lab for lab in space.labels if lab not in images]
        if missing:
            raise SpaceError(f"map does not define an image for {missing}")
        table = np.array([space.index(images[lab]) for lab in space.labels], dtype=int)
        table.setflags(write=False)

        def func(p):
            return table[np.asarray(p, dtype=int)]

        return cls(space, func, name, {"images": dict(images)})

    @classmethod
    def from_expr(cls, space: IntervalSpace, src: str, overrides: dict | None = None,
                  name: str = "T") -> "SelfMap":
        """Map ``x -> expr(x)`` with optional exact-point overrides ``{point: value}``."""
        tree = kexpr.parse(src)
        unknown = kexpr.variables(tree) - {"x"}
        if unknown:
            raise SpaceError(f"map expression may only use x, found {sorted(unknown)}")
        pins = {float(k): float(v) for k, v in (overrides or {}).items()}

        def func(p):
            arr = np.asarray(p, dtype=float)
            if pins:
                hit = np.zeros(arr.shape, dtype=bool)
                pinned = np.zeros(arr.shape)
                for at, value in pins.items():
                    m = arr == at
                    hit |= m
                    pinned[m] = value
                safe = np.where(hit, 1.0, arr) if hit.any() else arr
                out = np.where(hit, pinned, kexpr.evaluate(tree, safe))
            else:
                out = kexpr.evaluate(tree, arr)
            return float(out) if np.ndim(out) == 0 else out

        spec = {"expr": src}
        if pins:
            spec["overrides"] = [[k, v] for k, v in pins.items()]
        return cls(space, func, name, spec)


def _first_outside(space, p, image):
    p_arr = np.asarray(p)
    img = np.asarray(image)
    if img.ndim == 0 or p_arr.shape != img.shape:
        return p_arr.tolist(), img.tolist()
    for a, b in zip(p_arr.reshape(-1), img.reshape(-1)):
        if not space.contains(b):
            return a.item(), b.item()
    return p_arr.tolist(), img.tolist()


def fixed_points_on(T: SelfMap, points, tol: float = 0.0) -> np.ndarray:
    """Points of ``points`` whose displacement ``d(p, Tp)`` is at most ``tol``."""
    points = np.asarray(points)
    disp = np.asarray(T.displacement(points))
    return points[disp <= tol]


def map_to_dict(T: SelfMap) -> dict:
    return dict(T.spec)


def map_from_dict(space, data: dict, name: str = "T") -> SelfMap:
    """Finite: ``{"images": {label: label}}``; interval: ``{"expr": "x/3", "overrides": [[0, 2]]}``."""
    if not isinstance(data, dict):
        raise SpaceError("map file must hold a JSON object")
    if isinstance(space, FiniteSpace):
        if "images" not in data:
            raise SpaceError("finite map file needs an 'images' object")
        return SelfMap.finite(space, {str(k): str(v) for k, v in data["images"].items()}, name)
    if "expr" not in data:
        raise SpaceError("interval map file needs an 'expr' string")
    overrides = {float(a): float(b) for a, b in data.get("overrides", [])}
    return SelfMap.from_expr(space, data["expr"], overrides, name)


def load_map(space, path: str | Path) -> SelfMap:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpaceError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return map_from_dict(space, data)
