"""
Configuration objects are dataclasses; their canonical text form is sorted-key compact JSON.

>>> config = from_dict(TrainConfig, {'epochs': 5, 'loss': 'bce'})
>>> canonical(config)
'{"alpha":0.4,"batch_size":64,...}'
"""
import dataclasses
import json
import logging
import typing
from enum import Enum

from .errors import FormatError, InputError

logger = logging.getLogger(__name__)


def to_dict(obj):
    """Plain-JSON view of a config dataclass, enums replaced by their values."""
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    elif isinstance(obj, Enum):
        return obj.value
    elif isinstance(obj, (list, tuple)):
        return [to_dict(item) for item in obj]
    elif isinstance(obj, dict):
        return {str(key): to_dict(value) for key, value in obj.items()}

    return obj


def canonical(obj):
    return json.dumps(to_dict(obj), sort_keys=True, separators=(',', ':'))


def _coerce(hint, value, where):
    origin = typing.get_origin(hint)

    if origin is typing.Union:
        options = [arg for arg in typing.get_args(hint) if arg is not type(None)]
        if value is None:
            return None
        return _coerce(options[0], value, where)
    elif origin in (tuple, list):
        return tuple(value) if origin is tuple else list(value)
    elif isinstance(hint, type) and issubclass(hint, Enum):
        try:
            return hint(value)
        except ValueError:
            choices = ', '.join(str(member.value) for member in hint)
            raise InputError(f"{where}: {value!r} is not one of {choices}.")
    elif dataclasses.is_dataclass(hint):
        if isinstance(value, hint):
            return value
        return from_dict(hint, value, where)
    elif hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InputError(f"{where}: expected a number, got {value!r}.")
        return float(value)
    elif hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise InputError(f"{where}: expected an integer, got {value!r}.")
        return value
    elif hint is bool:
        if not isinstance(value, bool):
            raise InputError(f"{where}: expected true or false, got {value!r}.")
        return value

    return value


def from_dict(cls, mapping, where=None):
    """Build a config dataclass from a mapping, rejecting keys the class does not declare.

    :param cls: The dataclass.
    :param mapping: Field values; missing fields keep their defaults.
    :return: A validated instance of `cls`.
    """
    where = where or cls.__name__
    if not isinstance(mapping, dict):
        raise InputError(f"{where}: expected an object, got {type(mapping).__name__}.")

    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise InputError(f"{where}: unknown key(s) {', '.join(unknown)}.")

    kwargs = {name: _coerce(hints[name], value, f"{where}.{name}") for name, value in mapping.items()}
    config = cls(**kwargs)

    validate = getattr(config, 'validate', None)
    if validate is not None:
        validate()

    return config


def merge(base, overrides):
    """Override fields of a config instance from a mapping, nested configs merged recursively."""
    values = to_dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(values.get(key), dict):
            values[key] = {**values[key], **value}
        else:
            values[key] = value

    return from_dict(type(base), values)


def load_config(path, base):
    """Read a JSON config file and apply it on top of `base`.

    :param path: Path to a JSON object, or None to keep `base`.
    :param base: The preset instance supplying defaults.
    """
    if path is None:
        return base

    try:
        with open(path, encoding='utf-8') as f:
            overrides = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: line {e.lineno}: {e.msg}")

    return merge(base, overrides)
