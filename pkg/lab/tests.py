import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
import pandas as pd
from django.core.cache import cache
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings
from numpy.testing import assert_allclose, assert_array_equal

from spin_domain.domain import TorusDomain
from target_geometry.targets import CliffordTorus
from twisted_dirac.maps import linear_wrap_energy
from twisted_dirac.spectral import project_kernel_contour

from .exceptions import ConfigError, DegenerateProjection
from .factories import (
    FlowConfigFactory,
    HeatFlowConfigFactory,
    IndexConfigFactory,
    SpectralFlowFactory,
    SpectrumConfigFactory,
    TargetFactory,
)
from .management.base import EXIT_CONFIG_ERROR, EXIT_RUNTIME_ERROR, EXIT_VERIFY_FAILED
from .serializers import (
    FlowConfigSerializer,
    IndexConfigSerializer,
    SpectrumConfigSerializer,
    flow_config_from,
    key_line,
    parse_config,
    represent,
)
from .verification import VERIFY_GROUPS, Check, GroupResult, run_suite
from .writers import read_field, render_json, write_csv, write_field


class WorkspaceMixin:

    def setUp(self):
        super().setUp()
        cache.clear()
        workspace = tempfile.TemporaryDirectory()
        self.addCleanup(workspace.cleanup)
        self.workspace = Path(workspace.name)

    def write_config(self, document, name='config.json'):
        path = self.workspace / name
        path.write_text(json.dumps(document, indent=2), encoding='utf-8')
        return str(path)

    def call(self, command, *args, **options):
        stdout = StringIO()
        call_command(command, *args, stdout=stdout, **options)
        return stdout.getvalue()


class ParseConfigTests(SimpleTestCase):

    def test_defaults(self):
        data = parse_config('{"target": {"target": "sphere"}}', SpectrumConfigSerializer)
        self.assertEqual(data['grid'], [16, 16])
        assert_allclose(data['L'], [2 * np.pi, 2 * np.pi])
        self.assertEqual(data['spin_structure'], ['periodic', 'periodic'])
        self.assertEqual(data['map'], {'kind': 'constant'})
        self.assertEqual(data['kernel_block'], 'full')
        self.assertEqual(data['seed'], 0)
        self.assertIsNone(data['lambda'])
        self.assertIsNone(data['k'])

    def test_missing_target(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config('{}', SpectrumConfigSerializer, source='run.json')
        self.assertIn('run.json:1: target: This field is required.', ctx.exception.message)

    def test_unknown_key_reported_at_its_line(self):
        text = '{\n  "target": {"target": "sphere"},\n  "bogus": 1\n}'
        with self.assertRaises(ConfigError) as ctx:
            parse_config(text, SpectrumConfigSerializer, source='run.json')
        self.assertEqual(ctx.exception.details['errors'], ['run.json:3: bogus: Unknown key.'])

    def test_nested_unknown_key(self):
        text = '{\n  "target": {\n    "target": "sphere",\n    "radius": 2\n  }\n}'
        with self.assertRaises(ConfigError) as ctx:
            parse_config(text, SpectrumConfigSerializer, source='run.json')
        self.assertEqual(ctx.exception.details['errors'], ['run.json:4: target.radius: Unknown key.'])

    def test_bad_choice_reported_at_its_line(self):
        text = '{\n  "target": {"target": "sphere"},\n  "kernel_block": "(2,0)"\n}'
        with self.assertRaises(ConfigError) as ctx:
            parse_config(text, SpectrumConfigSerializer, source='run.json')
        [error] = ctx.exception.details['errors']
        self.assertTrue(error.startswith('run.json:3: kernel_block: '))
        self.assertIn('not a valid choice', error)

    def test_json_syntax_error(self):
        text = '{\n  "target": {"target": "sphere"},\n}'
        with self.assertRaises(ConfigError) as ctx:
            parse_config(text, SpectrumConfigSerializer, source='run.json')
        self.assertEqual(ctx.exception.details['line'], 3)
        self.assertTrue(ctx.exception.message.startswith('run.json:3:'))

    def test_target_parameters_belong_to_kind(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config('{"target": {"target": "sphere", "r1": 1.0}}', SpectrumConfigSerializer)
        self.assertIn('target.r1', ctx.exception.message)

    def test_odd_grid(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config(json.dumps(SpectrumConfigFactory(grid=[6, 7])), SpectrumConfigSerializer)
        self.assertIn('grid: Grid sizes must be even.', ctx.exception.message)

    def test_point_only_for_constant_maps(self):
        document = SpectrumConfigFactory(map={'kind': 'linear_wrap', 'point': [0.0, 0.0, 1.0]})
        with self.assertRaises(ConfigError) as ctx:
            parse_config(json.dumps(document), SpectrumConfigSerializer)
        self.assertIn('map.point', ctx.exception.message)

    def test_seed_range(self):
        with self.assertRaises(ConfigError):
            parse_config(json.dumps(SpectrumConfigFactory(seed=-1)), SpectrumConfigSerializer)
        data = parse_config(json.dumps(SpectrumConfigFactory(seed=2**64 - 1)), SpectrumConfigSerializer)
        self.assertEqual(data['seed'], 2**64 - 1)

    def test_representation_parses_back(self):
        for serializer_class, document in (
            (SpectrumConfigSerializer, SpectrumConfigFactory()),
            (FlowConfigSerializer, HeatFlowConfigFactory()),
            (IndexConfigSerializer, IndexConfigFactory(spectral_flow=SpectralFlowFactory())),
        ):
            data = parse_config(json.dumps(document), serializer_class)
            again = parse_config(json.dumps(represent(data, serializer_class)), serializer_class)
            self.assertEqual(again, data)

    def test_key_line_follows_path(self):
        text = '{\n  "a": 1,\n  "map": {\n    "kind": "x",\n    "a": 2\n  }\n}'
        self.assertEqual(key_line(text, ('a',)), 2)
        self.assertEqual(key_line(text, ('map', 'a')), 5)
        self.assertEqual(key_line(text, ('missing',)), 1)


class FlowConfigFromTests(SimpleTestCase):

    def test_mapping(self):
        data = parse_config(json.dumps(FlowConfigFactory()), FlowConfigSerializer)
        config = flow_config_from(data)
        self.assertEqual(config.dt, 0.01)
        self.assertEqual(config.spinor_mode, 'zero')
        self.assertEqual(config.domain['grid'], [6, 6])
        self.assertEqual(config.target, TargetFactory())
        self.assertEqual(config.initial_map, {'kind': 'constant'})
        self.assertIsNone(config.lambda_value)

    def test_fixed_policy_needs_threshold(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config(json.dumps(FlowConfigFactory(lambda_policy='fixed')), FlowConfigSerializer)
        self.assertIn('lambda', ctx.exception.message)

    def test_threshold_needs_fixed_policy(self):
        with self.assertRaises(ConfigError):
            parse_config(json.dumps(FlowConfigFactory(**{'lambda': 0.3})), FlowConfigSerializer)

    def test_fixed_threshold(self):
        document = FlowConfigFactory(lambda_policy='fixed', **{'lambda': 0.3})
        config = flow_config_from(parse_config(json.dumps(document), FlowConfigSerializer))
        self.assertEqual(config.lambda_policy, 'fixed')
        self.assertEqual(config.lambda_value, 0.3)

    def test_alpha_below_bound(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config(json.dumps(FlowConfigFactory(alpha=1.2)), FlowConfigSerializer)
        self.assertIn('alpha', ctx.exception.message)

    def test_non_positive_step(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config(json.dumps(FlowConfigFactory(dt=0.0)), FlowConfigSerializer)
        self.assertIn('dt: Must be positive.', ctx.exception.message)


class WriterTests(WorkspaceMixin, SimpleTestCase):

    def test_csv_header_and_precision(self):
        path = write_csv(self.workspace / 'table.csv', [{'b': 1, 'a': 1 / 3}], ['a', 'b'])
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 'a,b')
        self.assertEqual(float(lines[1].split(',')[0]), 1 / 3)

    def test_non_finite_floats_render_as_null(self):
        rendered = json.loads(render_json({'gap': float('nan'), 'count': np.int64(3), 'ok': np.bool_(True)}))
        self.assertEqual(rendered, {'gap': None, 'count': 3, 'ok': True})

    def test_field_dump(self):
        array = np.arange(12, dtype=float).reshape(2, 3, 2)
        binary = write_field(self.workspace, 'u', array, axes=['x', 'y', 'component'])
        header = json.loads((self.workspace / 'u.json').read_text())
        self.assertEqual(header['shape'], [2, 3, 2])
        self.assertEqual(header['dtype'], 'float64')
        self.assertEqual(header['endianness'], 'little')
        self.assertFalse(header['complex'])
        assert_array_equal(np.fromfile(binary, dtype='<f8'), np.arange(12.0))

    def test_complex_field_gets_re_im_axis(self):
        array = np.array([[1 + 2j, 3 - 4j]])
        write_field(self.workspace, 'psi', array, axes=['x', 'y'])
        header = json.loads((self.workspace / 'psi.json').read_text())
        self.assertEqual(header['axes'], ['x', 'y', 're_im'])
        self.assertEqual(header['shape'], [1, 2, 2])
        assert_array_equal(read_field(self.workspace / 'psi.json'), array)

    def test_axis_names_must_match(self):
        with self.assertRaises(ValueError):
            write_field(self.workspace, 'u', np.zeros((2, 2)), axes=['x'])


class SpectrumCommandTests(WorkspaceMixin, SimpleTestCase):

    def test_constant_sphere_map(self):
        config = self.write_config(SpectrumConfigFactory())
        self.call('spectrum', config=config, out=str(self.workspace))
        summary = json.loads((self.workspace / 'summary.json').read_text())
        self.assertEqual(summary['kernel_dim'], 4)
        self.assertEqual((summary['kernel_plus'], summary['kernel_minus']), (2, 2))
        self.assertAlmostEqual(summary['gap'], 0.5)

        table = pd.read_csv(self.workspace / 'spectrum.csv')
        self.assertEqual(list(table.columns), ['index', 'eigenvalue', 'abs_lambda', 'chirality', 'cluster_id'])
        self.assertEqual(len(table), summary['eigenvalue_count'])
        self.assertEqual(int((table['abs_lambda'] < summary['threshold']).sum()), 4)

    def test_output_is_reproducible(self):
        config = self.write_config(SpectrumConfigFactory(map={
            'kind': 'constant', 'perturbation': {'amplitude': 0.2, 'max_mode': 1},
        }, **{'lambda': 0.3}))
        first, second = self.workspace / 'first', self.workspace / 'second'
        self.call('spectrum', config=config, out=str(first))
        cache.clear()
        self.call('spectrum', config=config, out=str(second))
        self.assertEqual((first / 'spectrum.csv').read_bytes(), (second / 'spectrum.csv').read_bytes())
        self.assertEqual((first / 'summary.json').read_bytes(), (second / 'summary.json').read_bytes())

    def test_missing_target_is_a_config_error(self):
        config = self.write_config({'grid': [6, 6]})
        with self.assertRaises(CommandError) as ctx:
            self.call('spectrum', config=config, out=str(self.workspace))
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG_ERROR)
        self.assertIn('target: This field is required.', str(ctx.exception))

    def test_config_is_required(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('spectrum', out=str(self.workspace))
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG_ERROR)

    def test_seed_out_of_range(self):
        config = self.write_config(SpectrumConfigFactory())
        with self.assertRaises(CommandError) as ctx:
            self.call('spectrum', '--seed=-1', config=config, out=str(self.workspace))
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG_ERROR)

    def test_threads_must_be_positive(self):
        config = self.write_config(SpectrumConfigFactory())
        with self.assertRaises(CommandError) as ctx:
            self.call('spectrum', '--threads=0', config=config, out=str(self.workspace))
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG_ERROR)


class FlowCommandTests(WorkspaceMixin, SimpleTestCase):

    def test_constant_map_converges_at_once(self):
        config = self.write_config(FlowConfigFactory())
        self.call('flow', config=config, out=str(self.workspace))
        summary = json.loads((self.workspace / 'summary.json').read_text())
        self.assertEqual(summary['halted_by'], 'Converged')
        self.assertEqual(summary['steps'], 1)

        lines = (self.workspace / 'trace.jsonl').read_text().splitlines()
        self.assertEqual(len(lines), 3)
        self.assertEqual(json.loads(lines[-1])['event'], 'Converged')

        final_map = read_field(self.workspace / 'final_map.json')
        self.assertEqual(final_map.shape, (6, 6, 3))
        spinor_header = json.loads((self.workspace / 'final_spinor.json').read_text())
        self.assertEqual(spinor_header['axes'], ['x', 'y', 'spinor', 'component', 're_im'])
        self.assertEqual(spinor_header['shape'], [6, 6, 2, 3, 2])

    def test_perturbed_wrap_relaxes_to_harmonic_energy(self):
        config = self.write_config(HeatFlowConfigFactory())
        self.call('flow', config=config, out=str(self.workspace))
        summary = json.loads((self.workspace / 'summary.json').read_text())
        self.assertEqual(summary['halted_by'], 'Converged')
        self.assertEqual(summary['degree'], 1)
        expected = linear_wrap_energy(TorusDomain(8, 8), CliffordTorus(), [[1, 0], [0, 1]])
        self.assertLessEqual(abs(summary['E'] - expected), 1e-6)
        self.assertLessEqual(summary['energy_increase'], 1e-12)

    def test_trace_is_reproducible(self):
        config = self.write_config(FlowConfigFactory(map={
            'kind': 'constant', 'perturbation': {'amplitude': 0.2, 'max_mode': 1},
        }, max_steps=5))
        first, second = self.workspace / 'first', self.workspace / 'second'
        self.call('flow', config=config, out=str(first))
        cache.clear()
        self.call('flow', config=config, out=str(second))
        self.assertEqual((first / 'trace.jsonl').read_bytes(), (second / 'trace.jsonl').read_bytes())
        self.assertEqual((first / 'final_map.bin').read_bytes(), (second / 'final_map.bin').read_bytes())

    def test_numerical_failure_exits_with_step(self):
        config = self.write_config(FlowConfigFactory())
        failure = DegenerateProjection('Constraint spinor collapsed', details={'step': 3})
        with mock.patch('lab.management.commands.flow.run', side_effect=failure):
            with self.assertRaises(CommandError) as ctx:
                self.call('flow', config=config, out=str(self.workspace))
        self.assertEqual(ctx.exception.returncode, EXIT_RUNTIME_ERROR)
        self.assertIn('at step 3', str(ctx.exception))


class IndexCommandTests(WorkspaceMixin, SimpleTestCase):

    def test_default_table(self):
        self.call('index', out=str(self.workspace))
        table = pd.read_csv(self.workspace / 'index_table.csv')
        self.assertEqual(list(table.columns), ['deg', 'g_N', 'dim_C', 'script_I'])
        self.assertEqual(len(table), 21 * 6)
        expected = 2 * (table['deg'] * (table['g_N'] - 1)).abs()
        assert_array_equal(table['dim_C'], expected)
        assert_array_equal(table['script_I'], (expected // 2) % 2)
        self.assertFalse((self.workspace / 'spectral_flow.json').exists())

    def test_configured_ranges(self):
        config = self.write_config(IndexConfigFactory())
        self.call('index', config=config, out=str(self.workspace))
        table = pd.read_csv(self.workspace / 'index_table.csv')
        self.assertEqual(len(table), 5 * 4)

    def test_spectral_flow_section(self):
        config = self.write_config(IndexConfigFactory(spectral_flow=SpectralFlowFactory()))
        self.call('index', config=config, out=str(self.workspace))
        report = json.loads((self.workspace / 'spectral_flow.json').read_text())
        self.assertEqual([sample['kernel_dim'] for sample in report['samples']], [2] * 5)
        self.assertEqual(report['jumps'], [])
        self.assertTrue(report['parity_ok'])

    def test_reversed_range(self):
        config = self.write_config(IndexConfigFactory(degrees=[3, -3]))
        with self.assertRaises(CommandError) as ctx:
            self.call('index', config=config, out=str(self.workspace))
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG_ERROR)


class GroupResultTests(SimpleTestCase):

    def test_tolerance_scale(self):
        check = Check('residual', 1e-9, 1e-8)
        self.assertTrue(check.passed(1.0))
        self.assertFalse(check.passed(0.01))
        self.assertFalse(check.passed(-1.0))

    def test_lines(self):
        passed = GroupResult('flow', 1.0, [Check('a', 0.0, 0)])
        self.assertTrue(passed.line().startswith('PASS flow'))
        failed = GroupResult('flow', 1.0, [Check('a', 0.0, 0), Check('b', 2.0, 1.0)])
        self.assertFalse(failed.passed)
        self.assertTrue(failed.line().startswith('FAIL flow: 1/2 checks failed'))
        errored = GroupResult('flow', 1.0, error='EigenFailure: no convergence')
        self.assertEqual(errored.line(), 'FAIL flow: EigenFailure: no convergence')

    def test_unknown_group(self):
        with self.assertRaises(KeyError):
            run_suite(['nonexistent'])

    def test_target_geometry_covers_every_registered_target(self):
        result, = run_suite(['target_geometry'])
        self.assertTrue(result.passed, result.line())
        names = {check.name for check in result.checks}
        self.assertTrue({'projection_jacobian_fd', 'projection_hessian_fd', 'distance_bound_pairs'} <= names)

    def test_twisted_dirac_checks_sphere_quaternionic_structure(self):
        result, = run_suite(['twisted_dirac'])
        self.assertTrue(result.passed, result.line())
        self.assertIn('sphere_quaternionic_even_multiplicity', [check.name for check in result.checks])

    def test_kernel_projection_on_curved_maps(self):
        with mock.patch('lab.verification.project_kernel_contour', wraps=project_kernel_contour) as contour:
            result, = run_suite(['kernel_projection'])
        self.assertTrue(result.passed, result.line())
        self.assertEqual(contour.call_count, 22)
        curved = [call for call in contour.call_args_list if call.args[0].target.kind == 'sphere']
        self.assertEqual(len(curved), 15)


class VerifyCommandTests(WorkspaceMixin, SimpleTestCase):

    def test_groups_pass(self):
        output = self.call('verify', '--group=target_geometry', '--group=spin_domain', out=str(self.workspace))
        self.assertIn('PASS target_geometry', output)
        self.assertIn('PASS spin_domain', output)
        report = json.loads((self.workspace / 'verify.json').read_text())
        self.assertEqual([result['group'] for result in report['results']], ['target_geometry', 'spin_domain'])
        self.assertTrue(all(result['passed'] for result in report['results']))

    def test_full_suite_passes(self):
        output = self.call('verify', out=str(self.workspace))
        for group in VERIFY_GROUPS:
            self.assertIn(f'PASS {group}', output)
        self.assertIn(f'All {len(VERIFY_GROUPS)} groups passed', output)

    def test_groups_run_in_registry_order(self):
        results = run_suite(['spin_domain', 'target_geometry'])
        self.assertEqual([result.group for result in results], ['target_geometry', 'spin_domain'])
        self.assertEqual(list(VERIFY_GROUPS)[:2], ['target_geometry', 'spin_domain'])

    def test_seed_override(self):
        output = self.call('verify', '--group=target_geometry', '--seed=11', out=str(self.workspace))
        self.assertIn('PASS target_geometry', output)

    @override_settings(VERIFY_TOLERANCE_SCALE=-1.0)
    def test_corrupted_tolerance_fails(self):
        stdout = StringIO()
        with self.assertRaises(CommandError) as ctx:
            call_command('verify', '--group=kernel_projection', out=str(self.workspace), stdout=stdout)
        self.assertEqual(ctx.exception.returncode, EXIT_VERIFY_FAILED)
        self.assertIn('FAIL kernel_projection', stdout.getvalue())
        report = json.loads((self.workspace / 'verify.json').read_text())
        self.assertFalse(report['results'][0]['passed'])

    def test_unknown_group_is_a_config_error(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('verify', '--group=nonexistent', out=str(self.workspace))
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG_ERROR)

    def test_threads(self):
        output = self.call('verify', '--group=target_geometry', '--threads=1', out=str(self.workspace))
        self.assertIn('PASS target_geometry', output)
        with self.assertRaises(CommandError) as ctx:
            self.call('verify', '--threads=0', out=str(self.workspace))
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG_ERROR)
