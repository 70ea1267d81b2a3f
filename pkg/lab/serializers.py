"""
Run configuration documents.

Every command reads one JSON document and validates it with the serializers
below before any computation starts. Unknown keys are rejected at every
nesting level, and field errors are reported with the line of the offending
key:

    config.json:4: kernel_block: "(2,0)" is not a valid choice.
"""
import json
import logging
import re
from dataclasses import MISSING, fields
from pathlib import Path
from typing import Any, Dict, Iterator, Mapping, Tuple

import numpy as np
from rest_framework import serializers
from rest_framework.settings import api_settings

from flow.config import (
    INTEGRATORS,
    KERNEL_BLOCKS,
    LAMBDA_POLICIES,
    PROJECTION_METHODS,
    SPINOR_MODES,
    FlowConfig,
)
from spin_domain.domain import SPIN_SHIFTS
from target_geometry.targets import TARGET_REGISTRY, build_target

from .exceptions import ConfigError

logger = logging.getLogger(__name__)

SEED_MAX = 2**64 - 1

TARGET_KINDS = [(kind, target_class.__name__) for kind, target_class in TARGET_REGISTRY.items()]

MAP_KINDS = [
    ('constant', 'Constant map'),
    ('linear_wrap', 'Linear wrap onto the Clifford torus'),
]

SPECTRUM_BLOCKS = [
    ('full', 'Full operator'),
    ('(1,0)', 'Restriction to u*T_{1,0}N'),
    ('(0,1)', 'Restriction to u*T_{0,1}N'),
]

TARGET_PARAMETERS = {
    'sphere': ('q',),
    'clifford_torus': ('r1', 'r2'),
}

FLOW_DEFAULTS = {f.name: f.default for f in fields(FlowConfig) if f.default is not MISSING}


class StrictSerializer(serializers.Serializer):
    """Serializer that rejects keys it does not declare."""

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown key.'] for key in unknown})
        return super().to_internal_value(data)


class TargetSerializer(StrictSerializer):
    """{"target": "sphere", "q": 3} or {"target": "clifford_torus", "r1": 1.0, "r2": 1.0}"""
    target = serializers.ChoiceField(choices=TARGET_KINDS)
    q = serializers.IntegerField(required=False, min_value=2)
    r1 = serializers.FloatField(required=False)
    r2 = serializers.FloatField(required=False)

    def validate(self, attrs):
        allowed = TARGET_PARAMETERS[attrs['target']]
        foreign = {key: [f"Not a parameter of target {attrs['target']!r}."]
                   for key in ('q', 'r1', 'r2') if key in attrs and key not in allowed}
        if foreign:
            raise serializers.ValidationError(foreign)
        for radius in ('r1', 'r2'):
            if radius in attrs and not attrs[radius] > 0:
                raise serializers.ValidationError({radius: ['Radius must be positive.']})
        try:
            build_target(attrs)
        except ConfigError as e:
            key = allowed[0] if allowed and allowed[0] in attrs else 'target'
            raise serializers.ValidationError({key: [e.message]})
        return attrs


class PerturbationSerializer(StrictSerializer):
    amplitude = serializers.FloatField(min_value=0.0)
    max_mode = serializers.IntegerField(min_value=1, default=2)


class MapSpecSerializer(StrictSerializer):
    """
    Initial or endpoint map:

        {"kind": "constant", "point": [0, 0, 1]}
        {"kind": "linear_wrap", "wraps": [[1, 0], [0, 1]],
         "perturbation": {"amplitude": 0.05, "max_mode": 2}}
    """
    kind = serializers.ChoiceField(choices=MAP_KINDS, default='constant')
    point = serializers.ListField(child=serializers.FloatField(), min_length=2, required=False)
    wraps = serializers.ListField(
        child=serializers.ListField(child=serializers.IntegerField(), min_length=2, max_length=2),
        min_length=2,
        max_length=2,
        required=False,
    )
    perturbation = PerturbationSerializer(required=False)

    def validate(self, attrs):
        if attrs['kind'] != 'constant' and 'point' in attrs:
            raise serializers.ValidationError({'point': ['Only constant maps take a point.']})
        if attrs['kind'] != 'linear_wrap' and 'wraps' in attrs:
            raise serializers.ValidationError({'wraps': ['Only linear wraps take wrap numbers.']})
        return attrs


class SpinorSpecSerializer(StrictSerializer):
    mode = serializers.ChoiceField(choices=SPINOR_MODES, default=FLOW_DEFAULTS['spinor_mode'])
    index = serializers.IntegerField(min_value=0, default=FLOW_DEFAULTS['spinor_index'])


class RunConfigSerializer(StrictSerializer):
    """Domain, target and seed shared by every computing command."""
    grid = serializers.ListField(
        child=serializers.IntegerField(min_value=4),
        min_length=2,
        max_length=2,
        default=lambda: [16, 16],
    )
    L = serializers.ListField(
        child=serializers.FloatField(),
        min_length=2,
        max_length=2,
        default=lambda: [2.0 * np.pi, 2.0 * np.pi],
    )
    spin_structure = serializers.ListField(
        child=serializers.ChoiceField(choices=sorted(SPIN_SHIFTS)),
        min_length=2,
        max_length=2,
        default=lambda: ['periodic', 'periodic'],
    )
    target = TargetSerializer()
    seed = serializers.IntegerField(min_value=0, max_value=SEED_MAX, default=0)

    def validate_grid(self, value):
        if any(n % 2 for n in value):
            raise serializers.ValidationError("Grid sizes must be even.")
        return value

    def validate_L(self, value):
        if not all(length > 0 for length in value):
            raise serializers.ValidationError("Side lengths must be positive.")
        return value


class ThresholdMixin:
    """Adds the `lambda` key, which cannot be declared as a class attribute."""

    def get_fields(self):
        fields = super().get_fields()
        fields['lambda'] = serializers.FloatField(allow_null=True, default=None)
        return fields

    def validate_lambda(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError("Kernel threshold must be positive.")
        return value


class SpectrumConfigSerializer(ThresholdMixin, RunConfigSerializer):
    map = MapSpecSerializer(default=lambda: {'kind': 'constant'})
    kernel_block = serializers.ChoiceField(choices=SPECTRUM_BLOCKS, default='full')
    k = serializers.IntegerField(min_value=1, allow_null=True, default=None)


class FlowConfigSerializer(ThresholdMixin, RunConfigSerializer):
    map = MapSpecSerializer(default=lambda: {'kind': 'constant'})
    alpha = serializers.FloatField(min_value=1.0, default=FLOW_DEFAULTS['alpha'])
    alpha_bound = serializers.FloatField(default=FLOW_DEFAULTS['alpha_bound'])
    dt = serializers.FloatField(default=FLOW_DEFAULTS['dt'])
    t_max = serializers.FloatField(default=FLOW_DEFAULTS['t_max'])
    max_steps = serializers.IntegerField(min_value=1, default=FLOW_DEFAULTS['max_steps'])
    lambda_policy = serializers.ChoiceField(choices=LAMBDA_POLICIES, default=FLOW_DEFAULTS['lambda_policy'])
    reproject = serializers.BooleanField(default=FLOW_DEFAULTS['reproject'])
    reprojection_tol = serializers.FloatField(default=FLOW_DEFAULTS['reprojection_tol'])
    tangency_tol = serializers.FloatField(default=FLOW_DEFAULTS['tangency_tol'])
    convergence_tol = serializers.FloatField(default=FLOW_DEFAULTS['convergence_tol'])
    kernel_block = serializers.ChoiceField(choices=KERNEL_BLOCKS, default=FLOW_DEFAULTS['kernel_block'])
    projection_method = serializers.ChoiceField(choices=PROJECTION_METHODS,
                                                default=FLOW_DEFAULTS['projection_method'])
    integrator = serializers.ChoiceField(choices=INTEGRATORS, default=FLOW_DEFAULTS['integrator'])
    spinor = SpinorSpecSerializer(default=lambda: {'mode': FLOW_DEFAULTS['spinor_mode'],
                                                   'index': FLOW_DEFAULTS['spinor_index']})
    gradient_bound = serializers.FloatField(default=FLOW_DEFAULTS['gradient_bound'])
    monitor_kernel = serializers.BooleanField(default=FLOW_DEFAULTS['monitor_kernel'])
    eigen_count = serializers.IntegerField(min_value=1, allow_null=True, default=None)
    w1p_exponent = serializers.FloatField(default=FLOW_DEFAULTS['w1p_exponent'])

    def _positive(self, value):
        if not value > 0:
            raise serializers.ValidationError("Must be positive.")
        return value

    validate_dt = _positive
    validate_t_max = _positive
    validate_alpha_bound = _positive
    validate_reprojection_tol = _positive
    validate_tangency_tol = _positive
    validate_convergence_tol = _positive
    validate_gradient_bound = _positive

    def validate_w1p_exponent(self, value):
        if not value > 1:
            raise serializers.ValidationError("Exponent must exceed 1.")
        return value

    def validate(self, attrs):
        if attrs['lambda_policy'] == 'fixed' and attrs['lambda'] is None:
            raise serializers.ValidationError({'lambda': ["lambda_policy 'fixed' needs a threshold."]})
        if attrs['lambda_policy'] != 'fixed' and attrs['lambda'] is not None:
            raise serializers.ValidationError({'lambda': ["A threshold needs lambda_policy 'fixed'."]})
        if attrs['alpha'] >= 1.0 + attrs['alpha_bound']:
            raise serializers.ValidationError(
                {'alpha': [f"alpha must lie below 1 + alpha_bound = {1.0 + attrs['alpha_bound']}."]}
            )
        return attrs


class SpectralFlowSerializer(RunConfigSerializer):
    start = MapSpecSerializer()
    end = MapSpecSerializer()
    steps = serializers.IntegerField(min_value=1, default=8)
    threshold = serializers.FloatField()
    block = serializers.ChoiceField(choices=SPECTRUM_BLOCKS, default='(1,0)')
    k = serializers.IntegerField(min_value=1, allow_null=True, default=None)

    def validate_threshold(self, value):
        if not value > 0:
            raise serializers.ValidationError("Kernel threshold must be positive.")
        return value


class IndexConfigSerializer(StrictSerializer):
    """Inclusive degree and genus ranges of the CP¹ table, optionally a spectral-flow family."""
    degrees = serializers.ListField(child=serializers.IntegerField(), min_length=2, max_length=2,
                                    default=lambda: [-10, 10])
    genera = serializers.ListField(child=serializers.IntegerField(min_value=0), min_length=2, max_length=2,
                                   default=lambda: [0, 5])
    spectral_flow = SpectralFlowSerializer(required=False)

    def _ordered(self, value):
        if value[0] > value[1]:
            raise serializers.ValidationError("Range needs [min, max] with min ≤ max.")
        return value

    validate_degrees = _ordered
    validate_genera = _ordered


def _flatten(detail, path: Tuple = ()) -> Iterator[Tuple[Tuple, str]]:
    if isinstance(detail, Mapping):
        for key, value in detail.items():
            yield from _flatten(value, path + (key,))
    elif isinstance(detail, list) and all(isinstance(item, str) for item in detail):
        for message in detail:
            yield path, str(message)
    elif isinstance(detail, list):
        for index, item in enumerate(detail):
            yield from _flatten(item, path + (index,))
    else:
        yield path, str(detail)


def key_line(text: str, path: Tuple) -> int:
    """Line of the innermost key of `path` found in the document, 1 if none is."""
    position = 0
    for key in path:
        if not isinstance(key, str) or key == api_settings.NON_FIELD_ERRORS_KEY:
            continue
        match = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, position)
        if match is None:
            break
        position = match.start()
    return text.count('\n', 0, position) + 1


def _dotted(path: Tuple) -> str:
    parts = [str(key) for key in path if key != api_settings.NON_FIELD_ERRORS_KEY]
    return '.'.join(parts) or '<document>'


def parse_config(text: str, serializer_class, source: str = '<config>') -> Dict[str, Any]:
    """
    Validated data of a JSON configuration document.

    Raises:
        ConfigError: On a JSON syntax error or any schema violation; the
            message lists every violation as `source:line: key: reason`
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"{source}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}",
            details={'line': e.lineno, 'column': e.colno},
        )
    serializer = serializer_class(data=document)
    if not serializer.is_valid():
        messages = [f"{source}:{key_line(text, path)}: {_dotted(path)}: {message}"
                    for path, message in _flatten(serializer.errors)]
        raise ConfigError("Invalid configuration\n" + '\n'.join(messages), details={'errors': messages})
    logger.debug(f"Validated {serializer_class.__name__} document from {source}")
    return plain(serializer.validated_data)


def load_config(path, serializer_class) -> Dict[str, Any]:
    """
    Raises:
        ConfigError: If the file cannot be read or does not validate
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f"Cannot read configuration {path}: {e}")
    return parse_config(text, serializer_class, source=str(path))


def represent(data: Mapping, serializer_class) -> Dict[str, Any]:
    """Re-serialize validated data; parsing the result gives the same data back."""
    return plain(serializer_class(data).data)


def plain(value):
    """Nested mappings as plain dicts."""
    if isinstance(value, Mapping):
        return {key: plain(item) for key, item in value.items()}
    if isinstance(value, list):
        return [plain(item) for item in value]
    return value


def domain_spec(data: Mapping) -> Dict[str, Any]:
    return {'grid': list(data['grid']), 'L': list(data['L']), 'spin_structure': list(data['spin_structure'])}


def flow_config_from(data: Mapping) -> FlowConfig:
    """
    Raises:
        ConfigError: If the combined parameters do not form a valid flow configuration
    """
    params = {name: data[name] for name in (
        'alpha', 'alpha_bound', 'dt', 't_max', 'max_steps', 'lambda_policy', 'reproject',
        'reprojection_tol', 'tangency_tol', 'convergence_tol', 'kernel_block', 'projection_method',
        'integrator', 'gradient_bound', 'monitor_kernel', 'eigen_count', 'w1p_exponent', 'seed',
    )}
    params.update(
        lambda_value=data['lambda'],
        spinor_mode=data['spinor']['mode'],
        spinor_index=data['spinor']['index'],
        domain=domain_spec(data),
        target=dict(data['target']),
        initial_map=dict(data['map']),
    )
    return FlowConfig.from_dict(params)
