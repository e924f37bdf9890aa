# cython: language_level=3
"""Compiled canonical-JSON encoder.

Byte-identical twin of atcpip.canon.pure.dumps. The Decimal branch
delegates to the pure formatter so the two backends cannot drift on the
fixed-point rendering rules; everything hot (strings, ints, containers)
is typed here.
"""

from decimal import Decimal

from ..errors import CanonicalizationError
from .pure import format_decimal

cdef object _INT_MIN = -(2**63)
cdef object _INT_MAX = 2**63 - 1

cdef list _CONTROL_ESCAPES = [
    "\\u0000", "\\u0001", "\\u0002", "\\u0003", "\\u0004", "\\u0005",
    "\\u0006", "\\u0007", "\\b", "\\t", "\\n", "\\u000b", "\\f", "\\r",
    "\\u000e", "\\u000f", "\\u0010", "\\u0011", "\\u0012", "\\u0013",
    "\\u0014", "\\u0015", "\\u0016", "\\u0017", "\\u0018", "\\u0019",
    "\\u001a", "\\u001b", "\\u001c", "\\u001d", "\\u001e", "\\u001f",
]


cdef str _escape_slow(str value):
    cdef Py_ssize_t i, n = len(value)
    cdef Py_UCS4 ch
    parts = ['"']
    for i in range(n):
        ch = value[i]
        if ch == 0x22:
            parts.append('\\"')
        elif ch == 0x5c:
            parts.append("\\\\")
        elif ch < 0x20:
            parts.append(_CONTROL_ESCAPES[<int>ch])
        else:
            parts.append(value[i])
    parts.append('"')
    return "".join(parts)


cdef inline str _encode_str(str value):
    cdef Py_ssize_t i, n = len(value)
    cdef Py_UCS4 ch
    for i in range(n):
        ch = value[i]
        if ch < 0x20 or ch == 0x22 or ch == 0x5c:
            return _escape_slow(value)
    return '"' + value + '"'


cdef _encode(object value, list parts):
    cdef type kind = type(value)
    cdef Py_ssize_t index
    if kind is str:
        parts.append(_encode_str(<str>value))
    elif kind is bool:
        parts.append("true" if value else "false")
    elif kind is int:
        if value < _INT_MIN or value > _INT_MAX:
            raise CanonicalizationError(f"integer out of 64-bit range: {value}")
        parts.append(str(value))
    elif kind is dict:
        _encode_map(<dict>value, parts)
    elif kind is list or kind is tuple:
        index = 0
        parts.append("[")
        for item in value:
            if index:
                parts.append(",")
            index += 1
            _encode(item, parts)
        parts.append("]")
    elif kind is Decimal:
        parts.append(format_decimal(value))
    else:
        _encode_other(value, parts)


cdef _encode_other(object value, list parts):
    # Subclass fallback; bool first because bool subclasses int.
    cdef Py_ssize_t index
    if isinstance(value, bool):
        parts.append("true" if value else "false")
    elif isinstance(value, int):
        if value < _INT_MIN or value > _INT_MAX:
            raise CanonicalizationError(f"integer out of 64-bit range: {value}")
        parts.append(str(value))
    elif isinstance(value, str):
        parts.append(_encode_str(value))
    elif isinstance(value, Decimal):
        parts.append(format_decimal(value))
    elif isinstance(value, dict):
        _encode_map(value, parts)
    elif isinstance(value, (list, tuple)):
        index = 0
        parts.append("[")
        for item in value:
            if index:
                parts.append(",")
            index += 1
            _encode(item, parts)
        parts.append("]")
    elif value is None:
        raise CanonicalizationError("null is not a canonical value; omit the key instead")
    elif isinstance(value, float):
        raise CanonicalizationError(f"floats are not canonical values: {value!r}")
    else:
        raise CanonicalizationError(f"unencodable type {type(value).__name__}")


cdef _encode_map(object value, list parts):
    cdef list keys = list(value.keys())
    cdef bint first = True
    for key in keys:
        if not isinstance(key, str):
            raise CanonicalizationError(f"map keys must be strings, got {type(key).__name__}")
    keys.sort()
    parts.append("{")
    for key in keys:
        if not first:
            parts.append(",")
        first = False
        parts.append(_encode_str(<str>key))
        parts.append(":")
        _encode(value[key], parts)
    parts.append("}")


def dumps(value):
    """Encode a value to canonical bytes."""
    cdef list parts = []
    _encode(value, parts)
    try:
        return "".join(parts).encode("utf-8")
    except UnicodeEncodeError as exc:
        raise CanonicalizationError(f"string not encodable as UTF-8: {exc}") from None
