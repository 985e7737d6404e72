"""
Analytic sampling surfaces package.
"""
from typing import Any, Dict

from .base import (
    R_MAX,
    R_MIN,
    Surface,
    SurfaceKind,
    SurfaceSample,
    ambient_surface_gradient,
    ambient_surface_laplacian,
    poisson_disk_thin,
)
from .sphere import Sphere
from .torus import Torus
from .cone import Cone
from .wave import WavePatch
from .plane import PlanePatch
from .circle import Circle
from errors import InvalidParameter

__all__ = [
    'R_MAX',
    'R_MIN',
    'Surface',
    'SurfaceKind',
    'SurfaceSample',
    'Sphere',
    'Torus',
    'Cone',
    'WavePatch',
    'PlanePatch',
    'Circle',
    'ambient_surface_gradient',
    'ambient_surface_laplacian',
    'poisson_disk_thin',
]


def get_surface(kind: SurfaceKind, **params: Any) -> Surface:
    """
    Factory function to get the surface for a geometry kind.

    Args:
        kind: The surface kind enum
        **params: Geometry parameters forwarded to the surface constructor

    Returns:
        Surface: The configured surface instance

    Raises:
        InvalidParameter: If the kind is not supported
    """
    if kind == SurfaceKind.SPHERE:
        return Sphere(**params)
    elif kind == SurfaceKind.TORUS:
        return Torus(**params)
    elif kind == SurfaceKind.CONE:
        return Cone(**params)
    elif kind == SurfaceKind.WAVE_PATCH:
        return WavePatch(**params)
    elif kind == SurfaceKind.PLANE:
        return PlanePatch(**params)
    elif kind == SurfaceKind.CIRCLE:
        return Circle(**params)
    else:
        raise InvalidParameter(f"Unsupported surface kind: {kind}")


def get_surface_by_name(name: str, **params: Any) -> Surface:
    """
    Get a surface by geometry name string.

    Args:
        name: Geometry name ('sphere', 'torus', 'cone', 'wave', 'wave_patch', 'plane', 'flat', 'circle')

    Returns:
        Surface: The configured surface instance

    Raises:
        InvalidParameter: If the name is not recognized
    """
    name = name.lower().strip()
    aliases: Dict[str, SurfaceKind] = {
        'sphere': SurfaceKind.SPHERE,
        'torus': SurfaceKind.TORUS,
        'cone': SurfaceKind.CONE,
        'wave': SurfaceKind.WAVE_PATCH,
        'wave_patch': SurfaceKind.WAVE_PATCH,
        'plane': SurfaceKind.PLANE,
        'flat': SurfaceKind.PLANE,
        'circle': SurfaceKind.CIRCLE,
    }
    if name not in aliases:
        supported = sorted(set(aliases))
        raise InvalidParameter(f"Unsupported surface '{name}'. Supported: {supported}")
    return get_surface(aliases[name], **params)


def list_supported_surfaces():
    """
    List all supported sampling surfaces.

    Returns:
        List of tuples containing (kind, name, description)
    """
    return [
        (SurfaceKind.SPHERE, 'sphere', 'Unit sphere, Fibonacci lattice'),
        (SurfaceKind.TORUS, 'torus', 'Torus (1 - sqrt(x²+y²))² + z² = 1/9'),
        (SurfaceKind.CONE, 'cone', 'Cone x² + y² = 4z²/9, -6 <= z <= 0, open rim'),
        (SurfaceKind.WAVE_PATCH, 'wave', 'Wave z = sin(2x) sin(y) on [0,4π]², open'),
        (SurfaceKind.PLANE, 'plane', 'Flat patch z = 0 on [0,1]², open'),
        (SurfaceKind.CIRCLE, 'circle', 'Unit circle in R², closed curve'),
    ]
