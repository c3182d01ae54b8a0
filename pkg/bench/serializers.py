import math

import numpy as np
from rest_framework import serializers

from counterexamples.polygons import LAYOUTS, binary_sites
from purikit.exceptions import PreconditionError
from tensors.spectra import DISTRIBUTIONS
from tensors.states import DensityMatrix
from .models import RunRecord

SCHEMA_VERSION = 1
PURIFY_METHODS = ('sos_exact', 'sos_sdp', 'eigen_exact', 'eigen_trunc')


class FiniteFloatField(serializers.FloatField):
    """Renders inf and nan as null so output stays strict JSON."""

    def to_representation(self, value):
        value = float(value)
        return value if math.isfinite(value) else None


class ComplexMatrixField(serializers.Field):
    """Row-major list of [re, im] pairs."""

    def to_representation(self, value):
        flat = np.asarray(value, dtype=complex).reshape(-1)
        return [[float(z.real), float(z.imag)] for z in flat]

    def to_internal_value(self, data):
        try:
            pairs = np.asarray(data, dtype=float)
        except (TypeError, ValueError):
            raise serializers.ValidationError("entries must be a list of [re, im] pairs")
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise serializers.ValidationError("entries must be a list of [re, im] pairs")
        return pairs[:, 0] + 1j * pairs[:, 1]


class ArrayField(serializers.Field):
    """Nested lists for real arrays, {'real', 'imag'} for complex ones."""

    def to_representation(self, value):
        array = np.asarray(value)
        if np.iscomplexobj(array):
            return {'real': np.real(array).tolist(), 'imag': np.imag(array).tolist()}
        return array.tolist()


class DensityMatrixSerializer(serializers.Serializer):
    """Serializer for dense density matrices: {n_sites, local_dim, entries}."""
    n_sites = serializers.IntegerField(min_value=1)
    local_dim = serializers.IntegerField(min_value=1)
    entries = ComplexMatrixField(source='data')
    normalized = serializers.BooleanField(default=False)

    def validate(self, attrs):
        dim = attrs['local_dim'] ** attrs['n_sites']
        if attrs['data'].size != dim * dim:
            raise serializers.ValidationError(
                f"{attrs['data'].size} entries for a {dim} x {dim} matrix"
            )
        return attrs

    def create(self, validated_data):
        dim = validated_data['local_dim'] ** validated_data['n_sites']
        try:
            return DensityMatrix.from_array(
                validated_data['data'].reshape(dim, dim),
                validated_data['n_sites'],
                validated_data['local_dim'],
                normalized=validated_data['normalized'],
            )
        except PreconditionError as e:
            raise serializers.ValidationError({'entries': e.messages})


class SpectrumSerializer(serializers.Serializer):
    values = serializers.ListField(child=serializers.FloatField())
    ambient_dim = serializers.IntegerField()
    kind = serializers.CharField()
    normalized = serializers.BooleanField()
    params = serializers.DictField()
    m_distinct = serializers.IntegerField(read_only=True)


class GramPolynomialSerializer(serializers.Serializer):
    origin = serializers.CharField()
    scale = serializers.FloatField()
    k = serializers.IntegerField(source='degree_param')
    scaled_gram = ArrayField()
    gram = ArrayField()


class SdpSolutionSerializer(serializers.Serializer):
    status = serializers.CharField()
    iterations = serializers.IntegerField()
    objective = FiniteFloatField()
    dual_objective = FiniteFloatField()
    duality_gap = FiniteFloatField()
    primal_residual = FiniteFloatField()
    dual_residual = FiniteFloatField()
    scale = serializers.FloatField()
    z = ArrayField()
    R = ArrayField()
    history = serializers.ListField(child=serializers.DictField())


class FitResultSerializer(serializers.Serializer):
    k = serializers.IntegerField()
    distance = FiniteFloatField()
    status = serializers.CharField()
    raw_trace = FiniteFloatField()
    iterations = serializers.IntegerField()
    gram = GramPolynomialSerializer()


class DecayFitSerializer(serializers.Serializer):
    A = FiniteFloatField()
    B = FiniteFloatField()
    residual = FiniteFloatField()
    k_range = serializers.ListField(child=serializers.IntegerField())


class EigenCertificateSerializer(serializers.Serializer):
    product_indices = serializers.ListField(child=serializers.IntegerField())
    per_eigenvector_sr = serializers.ListField(child=serializers.IntegerField())
    chi_sr = serializers.ListField(child=serializers.IntegerField())
    D = serializers.IntegerField()
    n = serializers.IntegerField()
    bound_Dn = serializers.IntegerField()
    bound_Dn2 = serializers.IntegerField()
    purification_rank = serializers.IntegerField()
    holds = serializers.BooleanField()
    f_matrix = ComplexMatrixField()
    g_matrix = ComplexMatrixField()


class SiteTensorSerializer(serializers.Serializer):
    shape = serializers.ListField(child=serializers.IntegerField())
    entries = ComplexMatrixField()

    def to_representation(self, instance):
        return super().to_representation({'shape': list(instance.shape), 'entries': instance})


class MPSPurificationSerializer(serializers.Serializer):
    """Serializer for purifications; tensors are indexed (left, physical, ancilla, right)."""
    physical_dims = serializers.ListField(child=serializers.IntegerField())
    ancilla_dims = serializers.ListField(child=serializers.IntegerField())
    schmidt_ranks = serializers.ListField(child=serializers.IntegerField())
    purification_rank = serializers.IntegerField()
    meta = serializers.DictField()
    site_tensors = SiteTensorSerializer(many=True)


class SlackMatrixSerializer(serializers.Serializer):
    t = serializers.IntegerField()
    normalization = serializers.FloatField()
    circulant_row = serializers.ListField(child=serializers.FloatField())
    entries = ArrayField()
    rank = serializers.SerializerMethodField()

    def get_rank(self, obj):
        return obj.rank()


class PsdFactorizationSerializer(serializers.Serializer):
    r = serializers.IntegerField()
    residual = FiniteFloatField()
    success = serializers.BooleanField()
    restarts = serializers.IntegerField()
    seed = serializers.IntegerField()
    history = serializers.ListField(child=FiniteFloatField())
    E = serializers.ListField(child=ArrayField())
    F = serializers.ListField(child=ArrayField())


class RunRecordSerializer(serializers.ModelSerializer):
    """Serializer for RunRecord model."""
    class Meta:
        model = RunRecord
        fields = ['id', 'command', 'config', 'results', 'wall_time', 'version', 'status', 'created_at']
        read_only_fields = ['id', 'created_at']


# Experiment configurations

class ExperimentConfigSerializer(serializers.Serializer):
    """Flags shared by every experiment command."""
    seed = serializers.IntegerField(default=0)
    tol = serializers.FloatField(required=False, allow_null=True, default=None, min_value=0)
    out = serializers.CharField()
    jobs = serializers.IntegerField(default=1, min_value=1)
    format = serializers.ChoiceField(choices=['csv', 'json'], default='csv')


class CounterexampleConfigSerializer(ExperimentConfigSerializer):
    t_list = serializers.ListField(child=serializers.IntegerField(min_value=3), allow_empty=False)
    layout = serializers.ChoiceField(choices=LAYOUTS, default='flat')
    r_list = serializers.ListField(child=serializers.IntegerField(min_value=1), default=list)
    restarts = serializers.IntegerField(default=4, min_value=1)

    def validate(self, attrs):
        if attrs['layout'] == 'binary':
            for t in attrs['t_list']:
                try:
                    binary_sites(t)
                except PreconditionError:
                    raise serializers.ValidationError({'t_list': f"t={t} is not a power of two"})
        return attrs


class DistributionConfigSerializer(ExperimentConfigSerializer):
    b = serializers.FloatField(default=1.0, min_value=0)


class BenchDistributionsConfigSerializer(DistributionConfigSerializer):
    kinds = serializers.ListField(child=serializers.ChoiceField(choices=DISTRIBUTIONS), allow_empty=False)
    n_list = serializers.ListField(child=serializers.IntegerField(min_value=2), allow_empty=False)
    k_min = serializers.IntegerField(default=1, min_value=1)
    k_max = serializers.IntegerField(default=4, min_value=1)
    fit_k_min = serializers.IntegerField(default=2, min_value=1)
    fit_k_max = serializers.IntegerField(default=4, min_value=1)

    def validate(self, attrs):
        if attrs['k_min'] > attrs['k_max']:
            raise serializers.ValidationError({'k_min': "k_min must not exceed k_max"})
        if attrs['fit_k_min'] >= attrs['fit_k_max']:
            raise serializers.ValidationError({'fit_k_min': "the fit range needs two values of k"})
        return attrs


class PolyExportConfigSerializer(DistributionConfigSerializer):
    kind = serializers.ChoiceField(choices=DISTRIBUTIONS)
    n = serializers.IntegerField(min_value=2)
    k_list = serializers.ListField(child=serializers.IntegerField(min_value=1), allow_empty=False)
    grid = serializers.IntegerField(default=201, min_value=2)


class CompareMethodsConfigSerializer(DistributionConfigSerializer):
    kind = serializers.ChoiceField(choices=DISTRIBUTIONS)
    n = serializers.IntegerField(min_value=2)
    D = serializers.IntegerField(min_value=1)
    eps_list = serializers.ListField(child=serializers.FloatField(min_value=0, max_value=2),
                                     allow_empty=False)
    k_max = serializers.IntegerField(default=6, min_value=1)


class PurifyConfigSerializer(ExperimentConfigSerializer):
    input = serializers.CharField()
    method = serializers.ChoiceField(choices=PURIFY_METHODS)
    k = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=1)
    s = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=1)

    def validate(self, attrs):
        if attrs['method'] == 'sos_sdp' and attrs['k'] is None:
            raise serializers.ValidationError({'k': "sos_sdp needs k"})
        if attrs['method'] == 'eigen_trunc' and attrs['s'] is None:
            raise serializers.ValidationError({'s': "eigen_trunc needs s"})
        return attrs
