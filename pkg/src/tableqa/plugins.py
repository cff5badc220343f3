"""Result plugins: optional transforms applied between retrieval and answer.

A plugin receives the staged query result and returns a (possibly extended)
result. The built-in linear trend plugin demonstrates the predictive use:
when the result carries a year column and a numeric measure, it appends a
least-squares projection for the following year.
"""

from __future__ import annotations

from typing import Protocol

from .errors import PluginFailure, UnknownPlugin
from .store import QueryResult


class ResultPlugin(Protocol):
    name: str

    def apply(self, result: QueryResult) -> QueryResult: ...


class PluginRegistry:
    def __init__(self):
        self._plugins: dict[str, ResultPlugin] = {}

    def register(self, plugin: ResultPlugin) -> None:
        self._plugins[plugin.name] = plugin

    def get(self, name: str) -> ResultPlugin:
        if name not in self._plugins:
            raise UnknownPlugin(f"no plugin named {name!r}")
        return self._plugins[name]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._plugins))

    def apply_chain(self, names: tuple[str, ...], result: QueryResult) -> QueryResult:
        for name in names:
            plugin = self.get(name)
            try:
                result = plugin.apply(result)
            except Exception as exc:
                raise PluginFailure(f"plugin {name!r} failed: {exc}") from exc
        return result


class LinearTrendPlugin:
    """Append a projected row for the year after the latest one present."""

    name = "linear_trend"

    def apply(self, result: QueryResult) -> QueryResult:
        columns = [c.lower() for c in result.columns]
        if "year" not in columns or len(result.rows) < 2:
            return result
        year_idx = columns.index("year")
        value_idx = None
        for idx in range(len(columns) - 1, -1, -1):
            if idx == year_idx:
                continue
            if all(isinstance(r[idx], (int, float)) and not isinstance(r[idx], bool) for r in result.rows):
                value_idx = idx
                break
        if value_idx is None:
            return result
        points = sorted(
            {(int(r[year_idx]), float(r[value_idx])) for r in result.rows}
        )
        if len(points) < 2:
            return result
        n = len(points)
        mean_x = sum(p[0] for p in points) / n
        mean_y = sum(p[1] for p in points) / n
        denom = sum((p[0] - mean_x) ** 2 for p in points)
        if denom == 0:
            return result
        slope = sum((p[0] - mean_x) * (p[1] - mean_y) for p in points) / denom
        next_year = points[-1][0] + 1
        projected = mean_y + slope * (next_year - mean_x)
        template = list(result.rows[-1])
        template[year_idx] = next_year
        template[value_idx] = round(projected)
        return QueryResult(
            columns=result.columns,
            rows=result.rows + (tuple(template),),
            sql=result.sql,
        )


def default_registry() -> PluginRegistry:
    registry = PluginRegistry()
    registry.register(LinearTrendPlugin())
    return registry
