"""Exception types shared across the package."""

from __future__ import annotations


class EpkitError(Exception):
    """Base class for all package-specific errors."""


class NotPolytope(EpkitError):
    """The inequality system is unbounded in some direction."""

    def __init__(self, direction=None, message: str = "region is unbounded"):
        self.direction = direction
        super().__init__(message)


class EmptyRegion(EpkitError):
    """The inequality system has no feasible point."""


class DegenerateHull(EpkitError):
    """Input points span an affine subspace of lower dimension than requested."""

    def __init__(self, affine_dim: int, requested_dim: int | None = None):
        self.affine_dim = affine_dim
        self.requested_dim = requested_dim
        super().__init__(
            f"points span affine dimension {affine_dim}"
            + (f" (< {requested_dim})" if requested_dim is not None else "")
        )


class FlatProjection(EpkitError):
    """The projection lies in a proper affine subspace of the target space."""

    def __init__(self, affine_dim: int, affine_basis, base_point):
        self.affine_dim = affine_dim
        self.affine_basis = affine_basis
        self.base_point = base_point
        super().__init__(f"projection is flat with affine dimension {affine_dim}")


class NumericalFailure(EpkitError):
    """Pivoting broke down after anti-cycling safeguards were exhausted."""


class RowExplosion(EpkitError):
    """Intermediate elimination system exceeded the configured row cap."""

    def __init__(self, rows: int, cap: int):
        self.rows = rows
        self.cap = cap
        super().__init__(f"elimination produced {rows} rows (cap {cap})")


class InfeasibleArea(EmptyRegion):
    """An area's operating region is empty."""


class InfeasibleFeeder(EmptyRegion):
    """A feeder's operating region is empty."""


class NonRadial(EpkitError):
    """Feeder topology is not a tree rooted at the substation node."""


class InfeasibleCoordination(EmptyRegion):
    """No coordinator schedule satisfies all subsystem regions and the network."""


class InfeasibleBoundary(EmptyRegion):
    """A fixed boundary schedule is not realizable by the subsystem."""


class SchemaError(EpkitError):
    """A system file violates the documented JSON schema."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(message if field is None else f"{field}: {message}")
