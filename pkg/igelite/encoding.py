from __future__ import annotations

import dataclasses
import json
import math
from enum import Enum
from typing import Any, ClassVar, Protocol, cast

import numpy as np

from igelite.hypotheses import Provenance


def claim(provenance: Provenance) -> dict[str, Any]:
    """Field metadata for a numeric claim with a fixed provenance."""
    return {
        "provenance": provenance,
        "encoder": _encode_claim,
    }


def claim_from(field_name: str) -> dict[str, Any]:
    """Field metadata for a claim whose provenance is stored in another field."""
    return {
        "provenance_from": field_name,
        "encoder": _encode_claim,
    }


def omitted() -> dict[str, Any]:
    """Field metadata for values kept in memory but left out of documents."""
    return {"omit": True}


def _encode_claim(value: Any, metadata: dict[str, Any], owner: Any) -> Any:
    if "provenance_from" in metadata:
        provenance = getattr(owner, metadata["provenance_from"])
    else:
        provenance = metadata["provenance"]
    assert isinstance(provenance, Provenance)
    return {"value": encode(value), "provenance": provenance.value}


class DataclassProtocol(Protocol):
    __dataclass_fields__: ClassVar[dict[str, dataclasses.Field[Any]]]


Fields = list[tuple[str, dict[str, Any]]]


def fields(cls: type[DataclassProtocol]) -> Fields:
    """Expand the dataclass fields into (name, metadata) pairs, dropping omitted ones."""
    return [
        (field.name, dict(field.metadata))
        for field in dataclasses.fields(cls)
        if not field.metadata.get("omit", False)
    ]


def encode(value: Any) -> Any:
    """Convert results into plain JSON-compatible data.

    Non-finite floats become the strings "inf", "-inf" and "nan" so the output
    stays strict JSON; negative zero is normalized.
    """
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return _encode_dataclass(cast("DataclassProtocol", value))
    if isinstance(value, Enum):
        return encode(value.value)
    if isinstance(value, bool | str) or value is None:
        return value
    if isinstance(value, int | np.integer):
        return int(value)
    if isinstance(value, float | np.floating):
        return _encode_float(float(value))
    if isinstance(value, np.ndarray):
        return encode(cast("list[Any]", value.tolist()))
    if isinstance(value, dict):
        items = cast("dict[Any, Any]", value)
        return {str(key): encode(item) for key, item in items.items()}
    if isinstance(value, list | tuple):
        return [encode(item) for item in cast("list[Any]", value)]
    raise TypeError(f"cannot encode value of type {type(value).__name__}")


def _encode_dataclass(value: DataclassProtocol) -> dict[str, Any]:
    result: dict[str, Any] = {}
    for name, metadata in fields(type(value)):
        field_value = getattr(value, name)
        if "encoder" in metadata:
            result[name] = metadata["encoder"](field_value, metadata, value)
        else:
            result[name] = encode(field_value)
    return result


def _encode_float(value: float) -> float | str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value == 0.0:
        return 0.0
    return value


def to_json(value: Any) -> str:
    return json.dumps(encode(value), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
