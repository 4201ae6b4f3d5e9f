# Every failure the package raises on purpose derives from SimPBError, so the CLI can
# turn it into the right exit code (usage/config -> 1, data -> 2) in one place.


class SimPBError(Exception):
    """Base class for all errors raised by simpb_desk."""


class ConfigError(SimPBError):
    """Invalid configuration or an infeasible generation request."""


class UsageError(SimPBError):
    """The API was called with arguments that break its contract."""


class ShapeError(UsageError):
    """Tensor shapes do not agree for the requested operation."""

    def __init__(self, op: str, *shapes: tuple[int, ...]) -> None:
        self.op = op
        self.shapes = shapes
        rendered = " vs ".join(str(tuple(shape)) for shape in shapes)
        super().__init__(f"{op}: incompatible shapes {rendered}")


class ContractError(SimPBError):
    """An upstream guarantee was violated (e.g. a fully masked attention row)."""


class GeometryError(SimPBError):
    """A geometric quantity is undefined for the given input."""


class DataError(SimPBError):
    """Malformed or inconsistent data on disk, or a non-finite training signal."""
