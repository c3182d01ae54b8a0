from bench.base import ExperimentCommand, comma_list
from bench.serializers import BenchDistributionsConfigSerializer


class Command(ExperimentCommand):
    help = 'Distance curves over k, decay fits and the A/B-versus-n table for benchmark spectra'
    command_name = 'bench_distributions'
    config_serializer = BenchDistributionsConfigSerializer

    def add_experiment_arguments(self, parser):
        parser.add_argument('--kinds', type=comma_list, required=True)
        parser.add_argument('--n-list', type=comma_list, required=True)
        parser.add_argument('--k-min', type=int, default=None)
        parser.add_argument('--k-max', type=int, default=None)
        parser.add_argument('--fit-k-min', type=int, default=None)
        parser.add_argument('--fit-k-max', type=int, default=None)
        parser.add_argument('--b', type=float, default=None, help='Exponential decay rate')
