"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible grid dimensions."""


class ParseError(Exception):
    """A document (bundle, manifest, image header) could not be parsed."""


class NumericalError(ArithmeticError):
    """A linear solve or transform hit a numerically singular configuration."""


class DivergenceError(NumericalError):
    """An iterate left the finite range; message names the iteration."""
