import logging

import numpy as np

from lab.exceptions import AmbiguousCluster
from lab.management.base import LabCommand
from lab.serializers import SpectrumConfigSerializer, domain_spec
from lab.writers import write_csv, write_json
from spin_domain.domain import TorusDomain
from target_geometry.targets import build_target
from twisted_dirac.maps import build_map
from twisted_dirac.spectral import eigen_solve, even_multiplicity, symmetry_defect

logger = logging.getLogger(__name__)

SPECTRUM_COLUMNS = ['index', 'eigenvalue', 'abs_lambda', 'chirality', 'cluster_id']


class Command(LabCommand):
    help = 'Spectrum of the twisted Dirac operator along a configured map'
    config_serializer = SpectrumConfigSerializer

    def run(self, config, out):
        domain = TorusDomain.from_config(domain_spec(config))
        target = build_target(config['target'])
        u = build_map(domain, target, config['map'], np.random.default_rng(config['seed']))
        block = config['kernel_block']
        logger.info(f"Solving the {block} spectrum on {domain.Nx}×{domain.Ny}, target {target.kind}")
        spectral = eigen_solve(u, k=config['k'], which=block)

        if config['lambda'] is None:
            gap = spectral.gap()
            threshold = gap
        else:
            threshold = config['lambda']
            try:
                gap = spectral.gap()
            except AmbiguousCluster:
                gap = None
        kernel_dim = spectral.kernel_count(threshold)
        kernel_plus, kernel_minus = spectral.kernel_chirality(threshold)

        rows = [
            {
                'index': index,
                'eigenvalue': float(value),
                'abs_lambda': float(abs(value)),
                'chirality': int(chirality),
                'cluster_id': int(cluster),
            }
            for index, (value, chirality, cluster) in enumerate(
                zip(spectral.eigenvalues, spectral.chirality, spectral.clusters)
            )
        ]
        write_csv(out / 'spectrum.csv', rows, SPECTRUM_COLUMNS)

        summary = {
            'kernel_dim': kernel_dim,
            'gap': gap,
            'symmetry_defect': symmetry_defect(spectral),
            'even_multiplicity': even_multiplicity(spectral),
            'threshold': threshold,
            'kernel_plus': kernel_plus,
            'kernel_minus': kernel_minus,
            'block': block,
            'eigenvalue_count': spectral.count,
            'truncated': spectral.truncated,
            'domain': domain.describe(),
            'target': target.describe(),
        }
        write_json(out / 'summary.json', summary)
        self.stdout.write(self.style.SUCCESS(
            f"{spectral.count} eigenvalues, kernel dimension {kernel_dim} below Λ = {threshold:.6g}"
        ))
