from __future__ import annotations

import dataclasses
import json
import math
import types
import typing
from typing import Any, TypeVar, Union

import numpy as np

T = TypeVar("T", bound="JsonSerializable")


class ConfigError(Exception):
    pass


class JsonEncoder(json.JSONEncoder):
    def default(self, obj: Any) -> Any:
        if isinstance(obj, JsonSerializable):
            return obj.to_dict()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        return super().default(obj)


def _dataclass_hint(hint: Any) -> type | None:
    """The JsonSerializable dataclass inside ``hint``, also through ``X | None``."""
    candidates = (
        typing.get_args(hint)
        if typing.get_origin(hint) in (Union, types.UnionType)
        else (hint,)
    )
    for candidate in candidates:
        if (
            typing.get_origin(candidate) is None
            and isinstance(candidate, type)
            and issubclass(candidate, JsonSerializable)
        ):
            return candidate
    return None


def _plain(value: Any) -> Any:
    if isinstance(value, JsonSerializable):
        return value.to_dict()
    if isinstance(value, tuple | list):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.floating):
        return float(value)
    return value


class JsonSerializable:
    @classmethod
    def from_json(cls: type[T], data: dict) -> T:
        if not dataclasses.is_dataclass(cls):
            msg = f"{cls.__name__} is not a dataclass"
            raise TypeError(msg)
        if not isinstance(data, dict):
            msg = f"{cls.__name__} expects an object, got {type(data).__name__}"
            raise ConfigError(msg)

        hints = typing.get_type_hints(cls)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            msg = f"unknown keys for {cls.__name__}: {', '.join(unknown)}"
            raise ConfigError(msg)

        values = {}
        for key, value in data.items():
            nested = _dataclass_hint(hints[key])
            if nested is not None and isinstance(value, dict):
                values[key] = nested.from_json(value)
            else:
                values[key] = value
        try:
            return cls(**values)
        except TypeError as e:
            msg = f"invalid {cls.__name__}: {e}"
            raise ConfigError(msg) from e

    @classmethod
    def from_json_string(cls: type[T], json_str: str) -> T:
        try:
            data = json.loads(json_str)
        except json.JSONDecodeError as e:
            msg = f"config is not valid JSON: {e}"
            raise ConfigError(msg) from e
        return cls.from_json(data)

    def to_dict(self) -> dict:
        result = {}
        for f in dataclasses.fields(self):  # type: ignore[arg-type]
            value = getattr(self, f.name)
            if isinstance(value, float) and not math.isfinite(value):
                result[f.name] = None
            else:
                result[f.name] = _plain(value)
        return result

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=4, sort_keys=True, cls=JsonEncoder)
