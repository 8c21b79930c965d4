import pytest

from iscat.common import errors


@pytest.mark.parametrize(
    "cls, code",
    [
        (errors.ConfigError, 2),
        (errors.InvalidArgumentError, 2),
        (errors.ShapeMismatchError, 2),
        (errors.ConvergenceError, 3),
        (errors.DivergenceError, 3),
        (errors.StoreError, 4),
        (errors.ChecksumError, 4),
        (errors.TruncationError, 4),
    ],
)
def test_exit_codes(cls, code):
    assert cls.code == code, f"{cls.__name__} maps to exit code {cls.code}"


def test_error_payloads():
    e = errors.ConvergenceError("stalled", residual=1e-3, iterations=7)
    assert (e.residual, e.iterations) == (1e-3, 7)
    e = errors.DivergenceError("nan", diagnostics={"epoch": 2}, last_good={"w": 1})
    assert e.diagnostics == {"epoch": 2} and e.last_good == {"w": 1}
    assert errors.DivergenceError("nan").diagnostics == {}
    assert issubclass(errors.UndefinedBetaError, errors.DegenerateError)
    assert issubclass(errors.InvalidArgumentError, ValueError)
