"""Registry for externally backed metrics (LPIPS, face-ID similarity, CLIP score, ...).

A plugin is ``fn(a, b) -> float`` for ``kind="pair"`` or ``fn(image, text) -> float``
for ``kind="text"``. Unregistered metrics come back as ``None`` (absent),
never as a number.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable


@dataclass(frozen=True)
class Plugin:
    name: str
    fn: Callable
    kind: str = "pair"
    version: str = "0"

    @property
    def tag(self) -> str:
        return f"{self.name}@{self.version}"


class PluginRegistry:
    def __init__(self):
        self._plugins: dict[str, Plugin] = {}

    def register(self, name: str, fn: Callable, kind: str = "pair", version: str = "0") -> Plugin:
        if kind not in ("pair", "text"):
            raise ValueError("plugin kind must be 'pair' or 'text'")
        plugin = Plugin(name, fn, kind, version)
        self._plugins[name] = plugin
        return plugin

    def unregister(self, name: str) -> None:
        self._plugins.pop(name, None)

    def get(self, name: str) -> Plugin | None:
        return self._plugins.get(name)

    def names(self) -> list[str]:
        return sorted(self._plugins)

    def versions(self) -> dict[str, str]:
        return {n: p.version for n, p in sorted(self._plugins.items())}


registry = PluginRegistry()


def plugin_metric(name: str, a, b, plugins: PluginRegistry | None = None) -> dict | None:
    """Score with a registered plugin: ``{"value": float, "plugin": "name@version"}`` or None."""
    plugin = (plugins or registry).get(name)
    if plugin is None:
        return None
    return {"value": float(plugin.fn(a, b)), "plugin": plugin.tag}
