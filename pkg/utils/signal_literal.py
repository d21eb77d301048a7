"""
Signal literals: `offset + A*cos(w*t + p)` terms joined by `+` or `-`.

    2 + 0.5*cos(3*t + 1.0)
    -1.5e-1*cos(t) + cos(2*t - 0.25) + 4

Whitespace is ignored. The amplitude and the `w*` factor may be omitted
(defaulting to 1), and so may the phase (defaulting to 0). Constant terms
are summed into the offset.
"""
import re
from typing import List, Optional

from services.errors import SignalSyntaxError
from services.trajectory import CosComponent, QuasiPeriodicSignal

NUMBER = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"

COSINE_TERM = re.compile(
    rf"(?P<sign>[+-]?)(?:(?P<amplitude>{NUMBER})\*)?"
    rf"cos\((?:(?P<frequency>{NUMBER})\*)?t(?:(?P<phase_sign>[+-])(?P<phase>{NUMBER}))?\)"
)
CONSTANT_TERM = re.compile(rf"(?P<sign>[+-]?)(?P<value>{NUMBER})(?![*\w(])")


def parse_signal(text: str, field: str = "signal") -> QuasiPeriodicSignal:
    """
    Parse a signal literal into a QuasiPeriodicSignal, keeping terms in the
    order written (no canonicalization).

    Raises:
        SignalSyntaxError: the literal does not follow the grammar
    """
    compact = "".join(str(text).split())
    if not compact:
        raise SignalSyntaxError(field, "empty signal literal")
    offset: Optional[float] = None
    components: List[CosComponent] = []
    position = 0
    first = True
    while position < len(compact):
        if not first and compact[position] not in "+-":
            raise SignalSyntaxError(
                field, f"expected '+' or '-' at column {position + 1} of {text!r}"
            )
        cosine = COSINE_TERM.match(compact, position)
        if cosine:
            sign = -1.0 if cosine.group("sign") == "-" else 1.0
            amplitude = float(cosine.group("amplitude") or 1.0)
            frequency = float(cosine.group("frequency") or 1.0)
            phase = float(cosine.group("phase") or 0.0)
            if cosine.group("phase_sign") == "-":
                phase = -phase
            components.append(CosComponent(sign * amplitude, frequency, phase))
            position = cosine.end()
        else:
            constant = CONSTANT_TERM.match(compact, position)
            if not constant:
                raise SignalSyntaxError(
                    field, f"cannot parse term at column {position + 1} of {text!r}"
                )
            sign = -1.0 if constant.group("sign") == "-" else 1.0
            value = sign * float(constant.group("value"))
            offset = value if offset is None else offset + value
            position = constant.end()
        first = False
    return QuasiPeriodicSignal(0.0 if offset is None else offset, tuple(components))


def _signed(value: float) -> str:
    return f"- {-value!r}" if value < 0 or (value == 0 and str(value).startswith("-")) \
        else f"+ {value!r}"


def format_signal(signal: QuasiPeriodicSignal) -> str:
    """
    Literal for a signal. Floats are written with repr, so parsing the
    result gives back the same numbers bit for bit.
    """
    parts = [repr(signal.offset)]
    for comp in signal.components:
        amplitude = _signed(comp.amplitude)
        phase = _signed(comp.phase)
        parts.append(f"{amplitude}*cos({comp.angular_frequency!r}*t {phase})")
    return " ".join(parts)
