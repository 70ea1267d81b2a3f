import logging

from flow.run import initial_map, run
from flow.trace import dissipation_check
from lab.management.base import LabCommand
from lab.serializers import FlowConfigSerializer, flow_config_from
from lab.writers import write_field, write_json, write_jsonl

logger = logging.getLogger(__name__)


class Command(LabCommand):
    help = 'Run the α-Dirac-harmonic heat flow and dump its trace and final state'
    config_serializer = FlowConfigSerializer

    def run(self, config, out):
        flow_config = flow_config_from(config)
        trace = run(flow_config, initial_map(flow_config))
        final = trace.final_state

        write_jsonl(out / 'trace.jsonl', trace.rows())
        write_field(out, 'final_map', final.u.values, axes=['x', 'y', 'component'],
                    description='u(x, y) in ambient coordinates')
        write_field(out, 'final_spinor', final.psi.values, axes=['x', 'y', 'spinor', 'component'],
                    description='ψ(x, y) with one ℂ² spinor per ambient component')

        last = trace.records[-1]
        write_json(out / 'summary.json', {
            'halted_by': trace.halted_by,
            'steps': trace.steps,
            't': last.t,
            'E': last.E,
            'E_alpha': last.E_alpha,
            'el_residual': last.el_residual,
            'degree': last.degree,
            'kernel_dim': last.kernel_dim,
            'threshold': trace.threshold,
            'dissipation_residual': dissipation_check(trace) if len(trace.records) > 1 else 0.0,
            'energy_increase': trace.energy_increase(),
            'config': flow_config.as_dict(),
        })
        self.stdout.write(self.style.SUCCESS(
            f"Flow halted by {trace.halted_by} after {trace.steps} steps, E_α = {last.E_alpha:.10g}"
        ))
