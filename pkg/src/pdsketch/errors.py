from __future__ import annotations


class SketchError(ValueError):
    pass


class InvalidSpecError(SketchError):
    pass


class DomainError(SketchError):
    pass


class StreamFormatError(SketchError):
    def __init__(self, line_number: int, message: str) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ModelViolationError(SketchError):
    pass


class AccountingError(SketchError):
    pass


class PreconditionError(SketchError):
    pass


class PromiseViolationError(SketchError):
    pass


class HashCollisionError(SketchError):
    """Two distinct stream elements were summarized under one hashed id."""

    def __init__(self, hashed_id: int, first_tag: int, second_tag: int) -> None:
        super().__init__(
            f"hashed id {hashed_id} is shared by elements with tags {first_tag} and {second_tag}"
        )
        self.hashed_id = hashed_id
        self.pair = (first_tag, second_tag)


class UnknownAlgorithmError(SketchError):
    pass


class ParameterError(SketchError):
    pass


class OracleRefusedError(SketchError):
    pass


def raise_if_failures(failures: list[str], error: type[SketchError], header: str) -> None:
    """Raise `error` listing every collected failure, if any."""
    if failures:
        raise error(header + ":\n- " + "\n- ".join(failures))
