"""Error taxonomy shared by every app.

Validation problems subclass Django's ValidationError so management commands
and serializers can treat them uniformly; numerical breakdowns are
arithmetic errors.
"""
from django.core.exceptions import ValidationError


class DimensionMismatch(ValidationError):
    """Array shapes disagree with the declared site structure."""


class DenseCapExceeded(ValidationError):
    """A dense d**N x d**N object would exceed PURIKIT_DENSE_CAP."""


class PreconditionError(ValidationError):
    """An operation was called outside its domain (e.g. k >= m for the exact path)."""


class NumericalFailure(ArithmeticError):
    """Singular or ill-conditioned linear algebra beyond recovery."""
