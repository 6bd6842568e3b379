"""Per-risk-level charts of non-compliance counts as standalone SVG.

Each chart plots one risk level across targets: a radar polygon when there
are at least three targets, a bar chart otherwise. Every chart comes with a
plain-data sidecar holding the plotted numbers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping
from xml.sax.saxutils import escape

from webaudit.checklist import RiskLevel
from webaudit.risk import RiskProfile

SIZE = 400
CENTER = SIZE / 2
RADIUS = 140
RINGS = 4


@dataclass(frozen=True)
class Chart:
    level: RiskLevel
    kind: str  # "radar" or "bar"
    values: dict[str, int]
    svg: str

    @property
    def sidecar(self) -> dict:
        return {"level": self.level.name, "chart": self.kind, "values": dict(self.values),
                "scale_max": _scale(self.values)}

    def sidecar_json(self) -> str:
        return json.dumps(self.sidecar, sort_keys=True, indent=2) + "\n"


def _scale(values: Mapping[str, int]) -> int:
    return max([1, *values.values()])


def _f(x: float) -> str:
    text = f"{x:.2f}"
    return "0.00" if text == "-0.00" else text


def _svg(body: list[str], title: str) -> str:
    return "\n".join([
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
        f'viewBox="0 0 {SIZE} {SIZE}">',
        f"<title>{escape(title)}</title>",
        f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>',
        f'<text x="{_f(CENTER)}" y="20" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{escape(title)}</text>',
        *body,
        "</svg>",
    ]) + "\n"


def _radar(values: dict[str, int], title: str) -> str:
    labels = list(values)
    top = _scale(values)
    n = len(labels)

    def point(i: int, r: float) -> tuple[float, float]:
        angle = -math.pi / 2 + 2 * math.pi * i / n
        return CENTER + r * math.cos(angle), CENTER + r * math.sin(angle)

    body = []
    for ring in range(1, RINGS + 1):
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in (point(i, RADIUS * ring / RINGS)
                                                      for i in range(n)))
        body.append(f'<polygon points="{pts}" fill="none" stroke="#cccccc"/>')
    for i, label in enumerate(labels):
        x, y = point(i, RADIUS)
        lx, ly = point(i, RADIUS + 22)
        body.append(f'<line x1="{_f(CENTER)}" y1="{_f(CENTER)}" x2="{_f(x)}" y2="{_f(y)}" '
                    'stroke="#999999"/>')
        body.append(f'<text x="{_f(lx)}" y="{_f(ly)}" text-anchor="middle" '
                    f'font-family="sans-serif" font-size="12">{escape(label)} '
                    f'({values[label]})</text>')
    pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in (point(i, RADIUS * values[l] / top)
                                                  for i, l in enumerate(labels)))
    body.append(f'<polygon class="data" points="{pts}" fill="#d62728" fill-opacity="0.35" '
                'stroke="#d62728" stroke-width="2"/>')
    return _svg(body, title)


def _bars(values: dict[str, int], title: str) -> str:
    labels = list(values)
    top = _scale(values)
    left, bottom, height = 60.0, SIZE - 50.0, SIZE - 110.0
    width = (SIZE - left - 30) / max(len(labels), 1)
    body = [f'<line x1="{_f(left)}" y1="{_f(bottom)}" x2="{_f(SIZE - 30)}" y2="{_f(bottom)}" '
            'stroke="#999999"/>']
    for i, label in enumerate(labels):
        h = height * values[label] / top
        x = left + i * width + width * 0.15
        body.append(f'<rect class="data" x="{_f(x)}" y="{_f(bottom - h)}" '
                    f'width="{_f(width * 0.7)}" height="{_f(h)}" fill="#d62728"/>')
        body.append(f'<text x="{_f(x + width * 0.35)}" y="{_f(bottom + 18)}" '
                    f'text-anchor="middle" font-family="sans-serif" font-size="12">'
                    f'{escape(label)} ({values[label]})</text>')
    return _svg(body, title)


def emit_radar(profiles: Mapping[str, RiskProfile], level: RiskLevel) -> Chart:
    """Chart of the count at ``level`` for every labelled profile."""
    values = {label: int(p[level]) for label, p in profiles.items()}
    title = f"Non-compliant parameters at risk level {level.label}"
    if len(values) >= 3:
        return Chart(level, "radar", values, _radar(values, title))
    return Chart(level, "bar", values, _bars(values, title))


def emit_radar_set(profiles: Mapping[str, RiskProfile]) -> list[Chart]:
    """One chart per risk level, most severe first."""
    return [emit_radar(profiles, level) for level in sorted(RiskLevel, reverse=True)]


def write_charts(charts: list[Chart], directory: str | Path) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for chart in charts:
        stem = f"risk_{chart.level.name.lower()}"
        (out / f"{stem}.svg").write_text(chart.svg, encoding="utf-8")
        (out / f"{stem}.json").write_text(chart.sidecar_json(), encoding="utf-8")
        written += [out / f"{stem}.svg", out / f"{stem}.json"]
    return written
