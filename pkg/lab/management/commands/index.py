import logging

import numpy as np

from index_theory.cp1 import cp1_table
from index_theory.spectral_flow import spectral_flow_family
from lab.management.base import LabCommand
from lab.serializers import IndexConfigSerializer, domain_spec
from lab.writers import write_csv, write_json
from spin_domain.domain import TorusDomain
from target_geometry.targets import build_target
from twisted_dirac.maps import build_map

logger = logging.getLogger(__name__)

INDEX_COLUMNS = ['deg', 'g_N', 'dim_C', 'script_I']


class Command(LabCommand):
    help = 'CP¹ kernel-dimension table and, optionally, kernel dimensions along a map family'
    config_serializer = IndexConfigSerializer
    config_required = False

    def apply_seed(self, config, seed):
        if 'spectral_flow' not in config:
            return config
        return dict(config, spectral_flow=dict(config['spectral_flow'], seed=seed))

    def run(self, config, out):
        deg_min, deg_max = config['degrees']
        g_min, g_max = config['genera']
        rows = cp1_table(range(deg_min, deg_max + 1), range(g_min, g_max + 1))
        write_csv(out / 'index_table.csv', rows, INDEX_COLUMNS)
        self.stdout.write(self.style.SUCCESS(f"Index table with {len(rows)} rows"))

        if 'spectral_flow' in config:
            report = self.spectral_flow(config['spectral_flow'])
            write_json(out / 'spectral_flow.json', report.as_dict())
            style = self.style.SUCCESS if report.parity_ok else self.style.WARNING
            self.stdout.write(style(
                f"Kernel dimensions {report.dimensions}, {len(report.jumps)} jumps, parity ok: {report.parity_ok}"
            ))

    def spectral_flow(self, family):
        domain = TorusDomain.from_config(domain_spec(family))
        target = build_target(family['target'])
        rng = np.random.default_rng(family['seed'])
        u0 = build_map(domain, target, family['start'], rng)
        u1 = build_map(domain, target, family['end'], rng)
        return spectral_flow_family(u0, u1, family['steps'], family['threshold'],
                                    block=family['block'], k=family['k'])
