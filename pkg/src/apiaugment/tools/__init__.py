"""Tool registry: every tool maps a text input to an optional one-line text result."""

from __future__ import annotations

import datetime as dt
import logging
from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass, replace

from ..core import ApiCall, ExecutedCall
from .calculator import calc_eval
from .calendar import calendar_now
from .clients import ServiceClient, mt_translate, one_line, qa_ask
from .langid import LanguageIdentifier, TrigramLanguageIdentifier
from .search import SearchIndex, wiki_search

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ToolSpec:
    id: str
    execute: Callable[[str], str | None]
    timeout: float | None = None
    requires_input: bool = True


class ToolRegistry(Mapping[str, ToolSpec]):
    def __init__(self, tools: Mapping[str, ToolSpec] | None = None):
        self._tools = dict(tools or {})

    def __getitem__(self, name: str) -> ToolSpec:
        return self._tools[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tools)

    def __len__(self) -> int:
        return len(self._tools)

    def register(self, spec: ToolSpec) -> None:
        self._tools[spec.id] = spec

    def without(self, *names: str) -> "ToolRegistry":
        return ToolRegistry({k: v for k, v in self._tools.items() if k not in names})

    def with_date(self, today: dt.date) -> "ToolRegistry":
        """Copy whose Calendar answers for ``today``."""
        tools = dict(self._tools)
        if "Calendar" in tools:
            tools["Calendar"] = replace(tools["Calendar"], execute=lambda _i, d=today: calendar_now(d))
        return ToolRegistry(tools)

    def execute(self, call: ApiCall) -> ExecutedCall:
        """Run ``call``; unknown tools, empty required input and tool errors give no result."""
        spec = self._tools.get(call.tool)
        if spec is None or (spec.requires_input and not call.input.strip()):
            return ExecutedCall(call, None)
        try:
            out = spec.execute(call.input)
        except Exception:  # a tool failure never stops a run
            log.exception("tool %s failed on %r", call.tool, call.input)
            out = None
        if out is not None:
            out = one_line(out).replace("]", ")")
        return ExecutedCall(call, out or None)


def build_registry(search_index: SearchIndex | None = None,
                   qa_client: ServiceClient | None = None,
                   mt_client: ServiceClient | None = None,
                   langid: LanguageIdentifier | None = None,
                   today: dt.date | None = None,
                   client_timeout: float | None = None) -> ToolRegistry:
    """Registry of the tools that can be built from what is supplied.

    Calculator and Calendar are always present; the Calendar answers for
    ``today`` (wall clock when omitted, evaluated per call).
    """
    reg = ToolRegistry()
    reg.register(ToolSpec("Calculator", calc_eval))
    if today is None:
        reg.register(ToolSpec("Calendar", lambda _i: calendar_now(dt.date.today()), requires_input=False))
    else:
        reg.register(ToolSpec("Calendar", lambda _i: calendar_now(today), requires_input=False))
    if search_index is not None:
        reg.register(ToolSpec("WikiSearch", lambda q: wiki_search(search_index, q)))
    if qa_client is not None:
        reg.register(ToolSpec("QA", lambda q: qa_ask(qa_client, q), timeout=client_timeout))
    if mt_client is not None:
        detector = langid or TrigramLanguageIdentifier()
        reg.register(ToolSpec("MT", lambda t: mt_translate(mt_client, detector, t), timeout=client_timeout))
    return reg
