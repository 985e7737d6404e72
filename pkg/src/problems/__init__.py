"""
Benchmark problems package.
"""
from typing import Any, Dict, Union

from .base import (
    Benchmark,
    BenchmarkKind,
    BenchmarkReport,
    Discretization,
    FieldBenchmark,
    FieldReport,
    LevelResult,
    Settings,
    discretize,
    relative_l2_error,
)
from .heat_sphere import HeatSphere
from .torus import TorusForced
from .four_strip import FourStrip
from .advection_cone import AdvectionCone
from .cahn_hilliard import CahnHilliard
from .flat import FlatPoisson
from errors import InvalidParameter

__all__ = [
    'Benchmark',
    'BenchmarkKind',
    'BenchmarkReport',
    'Discretization',
    'FieldBenchmark',
    'FieldReport',
    'LevelResult',
    'Settings',
    'HeatSphere',
    'TorusForced',
    'FourStrip',
    'AdvectionCone',
    'CahnHilliard',
    'FlatPoisson',
    'discretize',
    'relative_l2_error',
]

AnyBenchmark = Union[Benchmark, FieldBenchmark]


def get_benchmark(kind: BenchmarkKind, **params: Any) -> AnyBenchmark:
    """
    Factory function to get the benchmark for a kind.

    Args:
        kind: The benchmark kind enum
        **params: Problem parameters (order, mode, jump, ...)

    Returns:
        The configured benchmark instance

    Raises:
        InvalidParameter: If the kind is not supported
    """
    if kind == BenchmarkKind.HEAT_SPHERE:
        return HeatSphere(**params)
    elif kind == BenchmarkKind.TORUS_FORCED:
        return TorusForced(**params)
    elif kind == BenchmarkKind.FOUR_STRIP:
        return FourStrip(**params)
    elif kind == BenchmarkKind.ADVECTION_CONE:
        return AdvectionCone(**params)
    elif kind == BenchmarkKind.CAHN_HILLIARD:
        return CahnHilliard(**params)
    elif kind == BenchmarkKind.FLAT_POISSON:
        return FlatPoisson(**params)
    else:
        raise InvalidParameter(f"Unsupported benchmark: {kind}")


def get_benchmark_by_name(name: str, **params: Any) -> AnyBenchmark:
    """
    Get a benchmark by name string.

    Args:
        name: Benchmark name ('heat-sphere', 'torus', 'four-strip', 'advection', 'cahn-hilliard', 'flat-poisson')

    Raises:
        InvalidParameter: If the name is not recognized
    """
    name = name.lower().strip()
    aliases: Dict[str, BenchmarkKind] = {kind.value: kind for kind in BenchmarkKind}
    aliases.update({
        'heat': BenchmarkKind.HEAT_SPHERE,
        'torus-forced': BenchmarkKind.TORUS_FORCED,
        'advection-cone': BenchmarkKind.ADVECTION_CONE,
        'cone': BenchmarkKind.ADVECTION_CONE,
        'ch': BenchmarkKind.CAHN_HILLIARD,
        'flat': BenchmarkKind.FLAT_POISSON,
    })
    if name not in aliases:
        supported = sorted(kind.value for kind in BenchmarkKind)
        raise InvalidParameter(f"Unsupported benchmark '{name}'. Supported: {supported}")
    return get_benchmark(aliases[name], **params)


def list_supported_benchmarks():
    """
    List all supported benchmarks.

    Returns:
        List of tuples containing (kind, name, description)
    """
    return [
        (BenchmarkKind.HEAT_SPHERE, 'heat-sphere', 'Heat equation on the unit sphere, u0 = xy'),
        (BenchmarkKind.TORUS_FORCED, 'torus', 'Forced diffusion on a torus, manufactured solution'),
        (BenchmarkKind.FOUR_STRIP, 'four-strip', 'Four strips of contrasting η on the wave patch'),
        (BenchmarkKind.ADVECTION_CONE, 'advection', 'Bell advected once around a cone'),
        (BenchmarkKind.CAHN_HILLIARD, 'cahn-hilliard', 'Phase separation on a torus'),
        (BenchmarkKind.FLAT_POISSON, 'flat-poisson', 'Laplace problem on the unit square'),
    ]
