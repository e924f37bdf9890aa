"""Pure-Python canonical JSON codec.

One byte form per value, project wide. Rules:

- maps sort keys by code point (equals UTF-8 byte order), no whitespace
- strings are UTF-8 with the minimal escape set (quote, backslash,
  controls below 0x20; short escapes where JSON has them, else \\u00xx
  lowercase); everything else stays raw, never \\uXXXX-escaped
- integers are 64-bit signed
- decimals are fixed-point with exactly four fractional digits and no
  exponent; negative zero normalizes to 0.0000
- floats and nulls are not values; encoding them raises, parsing null raises

The compiled twin in _speedups must stay byte-identical; its test suite
cross-checks the two on randomized values.
"""

import json
import re
from decimal import Decimal, InvalidOperation, localcontext

from ..errors import CanonicalizationError, ParseError

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1

QUANTUM = Decimal("0.0001")
ZERO4 = Decimal("0.0000")

_SHORT_ESCAPES = {
    '"': '\\"',
    "\\": "\\\\",
    "\b": "\\b",
    "\f": "\\f",
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
}
_ESCAPE_MAP = {c: _SHORT_ESCAPES.get(c, "\\u%04x" % ord(c)) for c in map(chr, range(0x20))}
_ESCAPE_MAP['"'] = '\\"'
_ESCAPE_MAP["\\"] = "\\\\"
_ESCAPE_RE = re.compile(r'[\x00-\x1f"\\]')


def _escape_char(match):
    return _ESCAPE_MAP[match.group(0)]


def encode_str(value):
    return '"' + _ESCAPE_RE.sub(_escape_char, value) + '"'


def fixed4(value):
    """Coerce str/int/Decimal to a four-digit fixed-point Decimal.

    Floats are rejected outright: their base-2 representation has no
    place in a byte-exact format. Values with more than four fractional
    digits are rejected rather than silently rounded.
    """
    if isinstance(value, bool) or isinstance(value, float):
        raise CanonicalizationError(f"not a decimal value: {value!r}")
    if isinstance(value, Decimal):
        dec = value
    elif isinstance(value, (int, str)):
        try:
            dec = Decimal(value)
        except InvalidOperation:
            raise CanonicalizationError(f"not a decimal literal: {value!r}") from None
    else:
        raise CanonicalizationError(f"not a decimal value: {value!r}")
    return _quantize4(dec)


def _quantize4(dec):
    if not dec.is_finite():
        raise CanonicalizationError(f"decimal must be finite, got {dec}")
    try:
        with localcontext() as ctx:
            ctx.prec = 60
            quantized = dec.quantize(QUANTUM)
    except InvalidOperation:
        raise CanonicalizationError(f"decimal out of range: {dec}") from None
    if quantized != dec:
        raise CanonicalizationError(f"more than four fractional digits: {dec}")
    if quantized == 0:
        return ZERO4
    return quantized


def format_decimal(dec):
    """Render a Decimal in canonical fixed-point form (exactly 4 digits)."""
    return format(_quantize4(dec), "f")


def _encode(value, parts):
    kind = type(value)
    if kind is str:
        parts.append(encode_str(value))
    elif kind is bool:
        parts.append("true" if value else "false")
    elif kind is int:
        if value < INT_MIN or value > INT_MAX:
            raise CanonicalizationError(f"integer out of 64-bit range: {value}")
        parts.append(str(value))
    elif kind is dict:
        _encode_map(value, parts)
    elif kind is list or kind is tuple:
        parts.append("[")
        for index, item in enumerate(value):
            if index:
                parts.append(",")
            _encode(item, parts)
        parts.append("]")
    elif kind is Decimal:
        parts.append(format_decimal(value))
    else:
        _encode_other(value, parts)


def _encode_other(value, parts):
    # Subclass fallback; bool first because bool subclasses int.
    if isinstance(value, bool):
        parts.append("true" if value else "false")
    elif isinstance(value, int):
        if value < INT_MIN or value > INT_MAX:
            raise CanonicalizationError(f"integer out of 64-bit range: {value}")
        parts.append(str(value))
    elif isinstance(value, str):
        parts.append(encode_str(value))
    elif isinstance(value, Decimal):
        parts.append(format_decimal(value))
    elif isinstance(value, dict):
        _encode_map(value, parts)
    elif isinstance(value, (list, tuple)):
        parts.append("[")
        for index, item in enumerate(value):
            if index:
                parts.append(",")
            _encode(item, parts)
        parts.append("]")
    elif value is None:
        raise CanonicalizationError("null is not a canonical value; omit the key instead")
    elif isinstance(value, float):
        raise CanonicalizationError(f"floats are not canonical values: {value!r}")
    else:
        raise CanonicalizationError(f"unencodable type {type(value).__name__}")


def _encode_map(value, parts):
    keys = list(value.keys())
    for key in keys:
        if not isinstance(key, str):
            raise CanonicalizationError(f"map keys must be strings, got {type(key).__name__}")
    keys.sort()
    parts.append("{")
    first = True
    for key in keys:
        if not first:
            parts.append(",")
        first = False
        parts.append(encode_str(key))
        parts.append(":")
        _encode(value[key], parts)
    parts.append("}")


def dumps(value):
    """Encode a value to canonical bytes."""
    parts = []
    _encode(value, parts)
    try:
        return "".join(parts).encode("utf-8")
    except UnicodeEncodeError as exc:
        raise CanonicalizationError(f"string not encodable as UTF-8: {exc}") from None


_DECIMAL_TOKEN_RE = re.compile(r"-?(?:0|[1-9][0-9]*)\.[0-9]{1,4}")


def _parse_decimal_token(token):
    if not _DECIMAL_TOKEN_RE.fullmatch(token):
        raise ParseError(
            f"number token {token!r} is not canonical: decimals carry one to four "
            "fractional digits and no exponent"
        )
    try:
        with localcontext() as ctx:
            ctx.prec = 60
            dec = Decimal(token).quantize(QUANTUM)
    except InvalidOperation:
        raise ParseError(f"decimal out of range: {token}") from None
    return ZERO4 if dec == 0 else dec


def _parse_int_token(token):
    value = int(token)
    if value < INT_MIN or value > INT_MAX:
        raise ParseError(f"integer out of 64-bit range: {token}")
    return value


def _reject_constant(token):
    raise ParseError(f"non-finite number token {token!r} is not canonical")


def _pairs_hook(pairs):
    result = {}
    for key, value in pairs:
        if key in result:
            raise ParseError(f"duplicate map key {key!r}")
        result[key] = value
    return result


def _reject_null(value):
    if value is None:
        raise ParseError("null is not a canonical value")
    if isinstance(value, list):
        for item in value:
            _reject_null(item)
    elif isinstance(value, dict):
        for item in value.values():
            _reject_null(item)


def loads(data):
    """Parse canonical bytes (or str) back into values.

    Accepts any insignificant whitespace the stdlib parser accepts; use
    dumps round-trip comparison where byte-strictness matters (the wire
    codec does exactly that).
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            text = bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc}") from None
    elif isinstance(data, str):
        text = data
    else:
        raise ParseError(f"expected bytes or str, got {type(data).__name__}")
    try:
        value = json.loads(
            text,
            parse_float=_parse_decimal_token,
            parse_int=_parse_int_token,
            parse_constant=_reject_constant,
            object_pairs_hook=_pairs_hook,
        )
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from None
    _reject_null(value)
    return value
