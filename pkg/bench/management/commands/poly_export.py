from bench.base import ExperimentCommand, comma_list
from bench.serializers import PolyExportConfigSerializer


class Command(ExperimentCommand):
    help = 'Plot-ready samples of p_k(lam) - lam for the fitted sos polynomials'
    command_name = 'poly_export'
    config_serializer = PolyExportConfigSerializer

    def add_experiment_arguments(self, parser):
        parser.add_argument('--kind', required=True)
        parser.add_argument('--n', type=int, required=True)
        parser.add_argument('--k-list', type=comma_list, required=True)
        parser.add_argument('--grid', type=int, default=None)
        parser.add_argument('--b', type=float, default=None)
