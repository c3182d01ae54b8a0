from bench.base import ExperimentCommand
from bench.serializers import PURIFY_METHODS, PurifyConfigSerializer


class Command(ExperimentCommand):
    help = 'Purify a density matrix read from JSON and report ranks, distance and bound'
    command_name = 'purify'
    config_serializer = PurifyConfigSerializer

    def add_experiment_arguments(self, parser):
        parser.add_argument('--input', required=True, help='JSON file {n_sites, local_dim, entries}')
        parser.add_argument('--method', choices=PURIFY_METHODS, required=True)
        parser.add_argument('--k', type=int, default=None)
        parser.add_argument('--s', type=int, default=None)
