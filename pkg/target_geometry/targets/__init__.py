"""
Target manifold registry.

Targets are chosen by name in run configurations:
    {"target": "sphere", "q": 3}
    {"target": "clifford_torus", "r1": 1.0, "r2": 1.0}
"""
from typing import Any, Dict

from lab.exceptions import ConfigError

from .base import EmbeddedTarget
from .clifford_torus import CliffordTorus
from .sphere import UnitSphere

TARGET_REGISTRY = {
    UnitSphere.kind: UnitSphere,
    CliffordTorus.kind: CliffordTorus,
}


def build_target(spec: Dict[str, Any]) -> EmbeddedTarget:
    """
    Build a target from its configuration mapping.

    Raises:
        ConfigError: If the kind is unknown or its parameters are invalid
    """
    params = dict(spec)
    kind = params.pop('target', None)
    target_class = TARGET_REGISTRY.get(kind)
    if target_class is None:
        raise ConfigError(
            f"Unknown target kind: {kind!r}",
            details={'allowed': sorted(TARGET_REGISTRY)},
        )
    try:
        return target_class(**params)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid parameters for target {kind}: {e}")


__all__ = ['EmbeddedTarget', 'UnitSphere', 'CliffordTorus', 'TARGET_REGISTRY', 'build_target']
