from bench.base import ExperimentCommand, comma_list
from bench.serializers import CounterexampleConfigSerializer


class Command(ExperimentCommand):
    help = 'Rank profile of the regular t-gon family: slack rank, OSR of rho_t, SR of phi_t and phi_t^2'
    command_name = 'counterexample'
    config_serializer = CounterexampleConfigSerializer

    def add_experiment_arguments(self, parser):
        parser.add_argument('--t-list', type=comma_list, required=True, help='Comma-separated t values')
        parser.add_argument('--layout', choices=['flat', 'binary'], default='flat')
        parser.add_argument('--r-list', type=comma_list, default=None,
                            help='Factor sizes for the psd factorization search')
        parser.add_argument('--restarts', type=int, default=None)
