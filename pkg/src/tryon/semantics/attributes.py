"""Structured upper-body garment attributes and their caption form.

Captions follow one fixed template so that every attribute record maps to
exactly one string and back::

    a {fit} {color} {pattern} top with {collar}, {neckline} neckline, {sleeve}, {shirt_length} length
"""

import re
from dataclasses import asdict, dataclass

from ..errors import SemanticError

FIT = ("slim", "loose", "straight")
NECKLINE = ("low", "mid", "high")
COLLAR = ("v-neck", "deep v-neck", "round neck", "square neck", "irregular")
SLEEVE = ("sleeveless", "short sleeve", "long sleeve")
SHIRT_LENGTH = ("high waist", "normal", "long", "extra-long")

CLOSED_SETS = {
    "fit": FIT,
    "neckline": NECKLINE,
    "collar": COLLAR,
    "sleeve": SLEEVE,
    "shirt_length": SHIRT_LENGTH,
}
SLOTS = ("fit", "pattern", "color", "neckline", "collar", "sleeve", "shirt_length")

# Open-vocabulary slots hold one lowercase word (hyphens allowed).
TOKEN_RE = re.compile(r"[a-z0-9]+(?:-[a-z0-9]+)*")

# Common values for the open slots; used to seed the text vocabulary and
# the fixture generator. Not a validation list.
COMMON_COLORS = ("white", "black", "gray", "red", "blue", "navy", "green", "yellow",
                 "orange", "pink", "purple", "brown", "beige", "khaki", "cream", "multicolor")
COMMON_PATTERNS = ("solid", "striped", "plaid", "floral", "dotted", "checked", "printed",
                   "graphic", "camouflage", "geometric", "lettering", "embroidered")


@dataclass(frozen=True)
class GarmentAttributes:
    fit: str
    pattern: str
    color: str
    neckline: str
    collar: str
    sleeve: str
    shirt_length: str

    def as_dict(self):
        return asdict(self)


class AttributeValidationError(SemanticError):
    """Raised with the complete list of slot violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{slot}: {msg}" for slot, msg in self.violations))

    @property
    def slots(self):
        return [slot for slot, _ in self.violations]


def validate_attributes(candidate):
    """Check a mapping (or record) against the seven-slot schema.

    Returns:
        A :class:`GarmentAttributes`.

    Raises:
        AttributeValidationError: listing every missing, unknown or illegal slot.
    """
    if isinstance(candidate, GarmentAttributes):
        candidate = candidate.as_dict()
    violations = []
    for slot in SLOTS:
        if slot not in candidate or candidate[slot] is None:
            violations.append((slot, "missing"))
            continue
        value = candidate[slot]
        if not isinstance(value, str):
            violations.append((slot, f"expected a string, got {type(value).__name__}"))
        elif slot in CLOSED_SETS:
            if value not in CLOSED_SETS[slot]:
                allowed = ", ".join(CLOSED_SETS[slot])
                violations.append((slot, f"{value!r} not in {{{allowed}}}"))
        elif not TOKEN_RE.fullmatch(value):
            violations.append((slot, f"{value!r} is not a lowercase single-word token"))
    for extra in sorted(set(candidate) - set(SLOTS)):
        violations.append((extra, "unknown slot"))
    if violations:
        raise AttributeValidationError(violations)
    return GarmentAttributes(**{slot: candidate[slot] for slot in SLOTS})


def serialize_caption(attrs):
    return (f"a {attrs.fit} {attrs.color} {attrs.pattern} top with {attrs.collar}, "
            f"{attrs.neckline} neckline, {attrs.sleeve}, {attrs.shirt_length} length")


def _alt(values):
    # longest first so "deep v-neck" wins over "v-neck"
    return "(" + "|".join(re.escape(v) for v in sorted(values, key=len, reverse=True)) + ")"


_TOKEN = "(" + TOKEN_RE.pattern + ")"

# (literal prefix, slot, value pattern) consumed left to right
_PIECES = (
    ("a ", "fit", _alt(FIT)),
    (" ", "color", _TOKEN),
    (" ", "pattern", _TOKEN),
    (" top with ", "collar", _alt(COLLAR)),
    (", ", "neckline", _alt(NECKLINE)),
    (" neckline, ", "sleeve", _alt(SLEEVE)),
    (", ", "shirt_length", _alt(SHIRT_LENGTH)),
)
_PIECE_RES = [(slot, re.compile(re.escape(prefix) + pattern)) for prefix, slot, pattern in _PIECES]
_TAIL_RE = re.compile(r" length\.?")


class CaptionParseError(SemanticError):
    def __init__(self, slot, text):
        self.slot = slot
        self.text = text
        super().__init__(f"caption does not match template at slot {slot!r}: {text!r}")


def parse_caption(text):
    """Inverse of :func:`serialize_caption`; a trailing period is allowed.

    Raises:
        CaptionParseError: naming the first slot that fails to match.
    """
    s = text.strip()
    pos = 0
    values = {}
    for slot, regex in _PIECE_RES:
        m = regex.match(s, pos)
        if m is None:
            raise CaptionParseError(slot, text)
        values[slot] = m.group(1)
        pos = m.end()
    if not _TAIL_RE.fullmatch(s, pos):
        raise CaptionParseError("end", text)
    return validate_attributes(values)


_FENCE_RE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n?(.*?)\n?```", re.S)
_BRACKET_RE = re.compile(r"\([^()]*\)|\[[^\[\]]*\]|\{[^{}]*\}|<[^<>]*>")
_ROLE_RE = re.compile(r"^\s*(?:assistant|system|user|bot|ai|model|caption|answer|output|description)\s*:\s*",
                      re.I)
_NOISE_RE = re.compile(r"[*#`_~]+|\\n")
_SPACE_RE = re.compile(r"\s+")
_SPACE_PUNCT_RE = re.compile(r"\s+([,.;:!?])")


class EmptyCaptionError(SemanticError):
    pass


def _clean_once(s):
    s = _FENCE_RE.sub(r"\1", s)
    prev = None
    while prev != s:
        prev = s
        s = _BRACKET_RE.sub(" ", s)
    s = _NOISE_RE.sub(" ", s)
    s = _SPACE_RE.sub(" ", s).strip()
    while True:
        stripped = _ROLE_RE.sub("", s, count=1)
        if stripped == s:
            break
        s = stripped
    s = _SPACE_PUNCT_RE.sub(r"\1", s)
    return s.strip(" \"'")


def clean_caption(raw):
    """Remove API metadata, role prefixes, markdown and extra whitespace.

    Parenthesised/bracketed blocks are dropped entirely. The function is
    run to a fixed point, so it is idempotent.

    Raises:
        EmptyCaptionError: nothing is left after cleaning.
    """
    s = raw
    while True:
        cleaned = _clean_once(s)
        if cleaned == s:
            break
        s = cleaned
    if not s:
        raise EmptyCaptionError(f"caption is empty after cleaning: {raw!r}")
    return s


