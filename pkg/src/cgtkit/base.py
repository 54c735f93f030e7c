"""Shared estimator plumbing and validation helpers."""

from __future__ import annotations

import inspect


class CgtError(Exception):
    """Base class for all workbench errors."""


class ValidationError(CgtError):
    """Raised when user-supplied data violates a documented rule.

    ``field`` names the offending input so callers (CLI, HTTP API) can
    attach the error to the right place.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class NotFittedError(CgtError):
    """Estimator used before ``fit``."""


def check_is_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )


def check_positive(name: str, value, minimum=1) -> None:
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}", field=name)


class ParamsMixin:
    """get_params/set_params in the scikit-learn style.

    Hyperparameters are exactly the ``__init__`` keyword arguments, stored
    under the same attribute names. Fitted state uses trailing-underscore
    attributes and is never reported as a parameter.
    """

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters: {sorted(valid)}"
                )
            setattr(self, name, value)
        return self

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"
