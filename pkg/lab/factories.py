"""
factory_boy factories for run configuration documents.
"""
import factory


class TargetFactory(factory.DictFactory):
    target = 'sphere'
    q = 3


class CliffordTorusTargetFactory(factory.DictFactory):
    target = 'clifford_torus'
    r1 = 1.0
    r2 = 1.0


class MapSpecFactory(factory.DictFactory):
    kind = 'constant'


class PerturbedWrapFactory(factory.DictFactory):
    kind = 'linear_wrap'
    wraps = factory.List([factory.List([1, 0]), factory.List([0, 1])])
    perturbation = factory.Dict({'amplitude': 0.05, 'max_mode': 1})


class SpectrumConfigFactory(factory.DictFactory):
    grid = factory.List([6, 6])
    target = factory.SubFactory(TargetFactory)
    map = factory.SubFactory(MapSpecFactory)
    kernel_block = 'full'
    seed = 7


class FlowConfigFactory(factory.DictFactory):
    grid = factory.List([6, 6])
    target = factory.SubFactory(TargetFactory)
    map = factory.SubFactory(MapSpecFactory)
    dt = 0.01
    t_max = 1.0
    max_steps = 20
    spinor = factory.Dict({'mode': 'zero', 'index': 0})
    monitor_kernel = False


class HeatFlowConfigFactory(FlowConfigFactory):
    """Perturbed degree-one wrap onto the unit Clifford torus; relaxes to the linear wrap."""
    grid = factory.List([8, 8])
    target = factory.SubFactory(CliffordTorusTargetFactory)
    map = factory.SubFactory(PerturbedWrapFactory)
    dt = 0.1
    t_max = 100.0
    max_steps = 500
    convergence_tol = 1e-7
    seed = 3


class SpectralFlowFactory(factory.DictFactory):
    grid = factory.List([6, 6])
    target = factory.SubFactory(CliffordTorusTargetFactory)
    start = factory.SubFactory(MapSpecFactory)
    end = factory.SubFactory(MapSpecFactory)
    steps = 4
    threshold = 0.5


class IndexConfigFactory(factory.DictFactory):
    degrees = factory.List([-2, 2])
    genera = factory.List([0, 3])
