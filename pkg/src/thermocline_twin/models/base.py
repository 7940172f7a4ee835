"""Base model and array field type for immutable domain records."""

from typing import Annotated, Any

import numpy as np
from pydantic import BaseModel, ConfigDict, PlainSerializer, PlainValidator


def _as_readonly_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=float)
    array.setflags(write=False)
    return array


def _to_nested_list(array: np.ndarray) -> list[Any]:
    return array.tolist()  # type: ignore[no-any-return]


FloatArray = Annotated[
    np.ndarray,
    PlainValidator(_as_readonly_array),
    PlainSerializer(_to_nested_list, return_type=list, when_used="json"),
]
"""Float ndarray copied on validation, frozen, and dumped as nested lists in JSON."""


def _values_equal(left: Any, right: Any) -> bool:
    if isinstance(left, np.ndarray) or isinstance(right, np.ndarray):
        return bool(np.array_equal(left, right))
    if isinstance(left, (tuple, list)) and isinstance(right, (tuple, list)):
        return len(left) == len(right) and all(
            _values_equal(a, b) for a, b in zip(left, right)
        )
    return bool(left == right)


class FrozenModel(BaseModel):
    """Immutable pydantic model that may hold numpy arrays."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return all(
            _values_equal(getattr(self, name), getattr(other, name))
            for name in type(self).model_fields
        )

    __hash__ = None  # type: ignore[assignment]
