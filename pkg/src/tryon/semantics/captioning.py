"""Caption generation with a primary remote model, a fallback, and a local template.

Remote captioners are modelled as clients returning a
:class:`CaptionResponse`; a timeout, a safety rejection or an error is a
normal response, not an exception. Tests drive the chain with
:class:`ScriptedClient`.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Protocol

from ..errors import SemanticError
from .attributes import (CaptionParseError, EmptyCaptionError, clean_caption, parse_caption,
                         serialize_caption, validate_attributes)

log = logging.getLogger(__name__)

CAPTION = "caption"
TIMEOUT = "timeout"
SAFETY_REJECTION = "safety_rejection"
ERROR = "error"
RESPONSE_KINDS = (CAPTION, TIMEOUT, SAFETY_REJECTION, ERROR)

SOURCES = ("primary", "fallback", "local_template")


@dataclass(frozen=True)
class CaptionResponse:
    kind: str
    text: str = ""

    def __post_init__(self):
        if self.kind not in RESPONSE_KINDS:
            raise ValueError(f"unknown response kind {self.kind!r}")


@dataclass(frozen=True)
class CaptionResult:
    text: str
    source: str
    raw: str


class CaptionClient(Protocol):
    def request(self, image, prompt: str) -> CaptionResponse: ...


class ScriptedClient:
    """Returns canned responses in order, repeating the last one."""

    def __init__(self, *responses):
        if not responses:
            raise ValueError("ScriptedClient needs at least one response")
        self.responses = list(responses)
        self.calls = 0

    def request(self, image, prompt):
        r = self.responses[min(self.calls, len(self.responses) - 1)]
        self.calls += 1
        return r


class CallableClient:
    """Adapts ``fn(image, prompt) -> str``; exceptions become error responses."""

    def __init__(self, fn):
        self.fn = fn

    def request(self, image, prompt):
        try:
            return CaptionResponse(CAPTION, self.fn(image, prompt))
        except TimeoutError:
            return CaptionResponse(TIMEOUT)
        except Exception as exc:  # noqa: BLE001 - any adapter failure is a modelled error
            return CaptionResponse(ERROR, str(exc))


class CaptionUnavailableError(SemanticError):
    def __init__(self, attempts):
        self.attempts = attempts
        super().__init__("no captioner produced a usable caption: " +
                         "; ".join(f"{src}={why}" for src, why in attempts))


DEFAULT_PROMPT = ("Describe the upper-body garment as: a <fit> <color> <pattern> top with <collar>, "
                  "<neckline> neckline, <sleeve>, <shirt length> length.")


@dataclass
class CaptionPolicy:
    """Per-client retry budget and the prompt passed to remote clients."""

    attempts_per_client: int = 1
    prompt: str = DEFAULT_PROMPT
    retry_on: tuple = (TIMEOUT, ERROR)
    attempts_log: list = field(default_factory=list)


def _accept(text):
    cleaned = clean_caption(text)
    parse_caption(cleaned)
    return cleaned


def generate_caption(garment_image, primary=None, fallback=None, attributes=None,
                     policy: Optional[CaptionPolicy] = None):
    """Caption a garment, degrading from primary to fallback to the local template.

    A remote caption is accepted only if it survives :func:`clean_caption`
    and :func:`parse_caption`; anything else moves on to the next source.
    Safety rejections are never retried on the same client.

    Args:
        garment_image: passed through to the clients untouched.
        primary, fallback: :class:`CaptionClient` instances or ``None``.
        attributes: annotation used by the local template captioner.

    Raises:
        CaptionUnavailableError: every source failed.
    """
    policy = policy or CaptionPolicy()
    attempts = []
    for source, client in (("primary", primary), ("fallback", fallback)):
        if client is None:
            continue
        for _ in range(max(policy.attempts_per_client, 1)):
            resp = client.request(garment_image, policy.prompt)
            if resp.kind == CAPTION:
                try:
                    text = _accept(resp.text)
                except (EmptyCaptionError, CaptionParseError) as exc:
                    attempts.append((source, f"malformed: {exc}"))
                    break
                policy.attempts_log.extend(attempts + [(source, "ok")])
                return CaptionResult(text, source, resp.text)
            attempts.append((source, resp.kind))
            if resp.kind not in policy.retry_on:
                break
        log.info("caption source %s failed: %s", source, attempts[-1][1])
    if attributes is not None:
        attrs = validate_attributes(attributes)
        text = serialize_caption(attrs)
        policy.attempts_log.extend(attempts + [("local_template", "ok")])
        return CaptionResult(text, "local_template", text)
    policy.attempts_log.extend(attempts)
    raise CaptionUnavailableError(attempts or [("local_template", "no attribute annotation")])
