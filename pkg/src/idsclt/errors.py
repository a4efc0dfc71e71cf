"""Exception types raised across the package."""


class InvalidGeometryError(ValueError):
    pass


class ContractViolation(ValueError):
    pass


class AssemblyError(KeyError):
    pass


class CoverageError(KeyError):
    pass


class CapacityError(RuntimeError):
    pass


class NotPositiveDefiniteError(ValueError):
    pass


class DomainError(ValueError):
    pass


class PoleError(ZeroDivisionError):
    pass


class ConditioningError(ValueError):
    pass


class QuadratureError(ValueError):
    pass


class EmptyDataError(ValueError):
    pass


class ShardMismatchError(RuntimeError):
    def __init__(self, expected, found):
        super().__init__(f"shard config hash {found} does not match run config hash {expected}")
        self.expected = expected
        self.found = found


class ConfigError(ValueError):
    """Raised with every violation found, not only the first one."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
