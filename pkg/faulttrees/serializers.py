"""
Serializers for experiment inputs read from JSON files and command options.
"""
from django.core.exceptions import ValidationError as DjangoValidationError
from rest_framework import serializers

from .span_program import KINDS, MAX_ARITY
from .validators import ParameterValidator, TreeValidator

ALGORITHMS = ('shortcircuit', 'splitsearch')


class FunctionSpecSerializer(serializers.Serializer):
    """Serializer for a direct function description"""

    kind = serializers.ChoiceField(choices=list(KINDS) + ['nand', 'majority'])
    arity = serializers.IntegerField(min_value=2, max_value=MAX_ARITY, required=False)
    h = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    truth_table = serializers.ListField(
        child=serializers.IntegerField(min_value=0, max_value=1), required=False, allow_empty=True
    )
    polarity = serializers.ListField(child=serializers.BooleanField(), required=False, allow_empty=True)

    def validate(self, data):
        """Fill in arity for the shorthand kinds and check kind-specific fields"""
        kind = data['kind']
        if kind == 'nand':
            return {'arity': 2, 'kind': 'negated_threshold', 'h': 2}
        if kind == 'majority':
            arity = data.get('arity', 3)
            if arity % 2 == 0:
                raise serializers.ValidationError("Majority needs an odd arity")
            return {'arity': arity, 'kind': 'threshold', 'h': (arity + 1) // 2}

        if kind == 'custom':
            table = data.get('truth_table') or []
            arity = max(1, len(table)).bit_length() - 1
            if len(table) != 2 ** arity or arity < 2:
                raise serializers.ValidationError("Custom truth tables need 2^arity entries, arity >= 2")
            data['arity'] = arity
            return data

        if 'arity' not in data:
            raise serializers.ValidationError("Threshold kinds need an arity")
        if data.get('h') is None or not 1 <= data['h'] <= data['arity']:
            raise serializers.ValidationError(f"h must lie in 1..{data['arity']}")
        return data


class TreeSerializer(serializers.Serializer):
    """Serializer for an explicit tree"""

    arity = serializers.IntegerField(min_value=2, max_value=MAX_ARITY)
    depth = serializers.IntegerField(min_value=0, max_value=24)
    leaves = serializers.ListField(child=serializers.IntegerField(), allow_empty=False)

    def validate(self, data):
        """Validate the leaf count matches arity and depth"""
        try:
            TreeValidator.validate_leaves(data['arity'], data['depth'], data['leaves'])
        except DjangoValidationError as e:
            raise serializers.ValidationError(e.messages)
        return data


class HardDistSpecSerializer(serializers.Serializer):
    """Serializer for hard-distribution parameters"""

    function = FunctionSpecSerializer()
    n = serializers.IntegerField(min_value=3)
    k = serializers.IntegerField(min_value=1, default=1)
    strict = serializers.BooleanField(default=True)


class LazyTreeSerializer(serializers.Serializer):
    """Serializer for a tree drawn from a hard distribution"""

    distribution = HardDistSpecSerializer()
    seed = serializers.IntegerField(min_value=0)
    forced_root = serializers.IntegerField(min_value=0, max_value=1, required=False, allow_null=True)

    def validate_seed(self, value):
        """Validate seed range"""
        try:
            return ParameterValidator.validate_seed(value)
        except DjangoValidationError as e:
            raise serializers.ValidationError(e.messages)


class ComplexityParamsSerializer(serializers.Serializer):
    """Serializer for complexity recursion constants"""

    c1 = serializers.FloatField()
    c2 = serializers.FloatField()
    c_energy = serializers.FloatField(required=False, allow_null=True)
    c_prime = serializers.FloatField()

    def validate(self, data):
        """Validate constants together"""
        try:
            ParameterValidator.validate_complexity_constants(
                data['c1'], data['c2'], data.get('c_energy'), data['c_prime']
            )
        except DjangoValidationError as e:
            raise serializers.ValidationError(e.messages)
        return data


class BenchmarkCellSerializer(serializers.Serializer):
    """Serializer for one benchmark grid cell"""

    distribution = HardDistSpecSerializer()
    algorithm = serializers.ChoiceField(choices=ALGORITHMS)
    budget = serializers.IntegerField(required=False, allow_null=True)

    def validate_budget(self, value):
        if value is None:
            return value
        try:
            return ParameterValidator.validate_budget(value)
        except DjangoValidationError as e:
            raise serializers.ValidationError(e.messages)

    def validate(self, data):
        """Split search needs a budget"""
        if data['algorithm'] == 'splitsearch' and data.get('budget') is None:
            raise serializers.ValidationError("splitsearch cells need a budget")
        return data


class BenchmarkGridSerializer(serializers.Serializer):
    """Serializer for a benchmark grid file"""

    cells = BenchmarkCellSerializer(many=True, allow_empty=False)
    trials = serializers.IntegerField(min_value=1)
