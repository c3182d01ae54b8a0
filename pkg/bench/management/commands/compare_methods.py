from bench.base import ExperimentCommand, comma_list
from bench.serializers import CompareMethodsConfigSerializer


class Command(ExperimentCommand):
    help = 'Purification-rank bounds of the sos and eigenbasis methods per accuracy'
    command_name = 'compare_methods'
    config_serializer = CompareMethodsConfigSerializer

    def add_experiment_arguments(self, parser):
        parser.add_argument('--kind', required=True)
        parser.add_argument('--n', type=int, required=True)
        parser.add_argument('--D', type=int, required=True, help='Operator Schmidt rank')
        parser.add_argument('--eps-list', type=comma_list, required=True)
        parser.add_argument('--k-max', type=int, default=None)
        parser.add_argument('--b', type=float, default=None)
