"""SVG 1.1 figures of a table with billiard paths"""
import io
import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import svgwrite

from billiard_security.services.beams import FocusChain
from billiard_security.services.curve import Table, evaluate
from billiard_security.services.ray import PolygonalPath

logger = logging.getLogger(__name__)

PATH_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")
FONT = "Arial, sans-serif"


@dataclass(frozen=True)
class Layout:
    width: int = 640
    height: int = 640
    margin: float = 32.0
    boundary_samples: int = 512
    vertex_radius: float = 3.0
    endpoint_radius: float = 5.0


class SvgRenderer:
    """Maps table coordinates to a square viewport with the y axis pointing up"""

    def __init__(self, table: Table, layout: Layout = Layout()):
        self.table = table
        self.layout = layout
        s = np.arange(layout.boundary_samples) / layout.boundary_samples
        self.boundary = evaluate(table, s, 0)[0]
        low = self.boundary.min(axis=0)
        high = self.boundary.max(axis=0)
        span = float(np.max(high - low))
        self.scale = min(layout.width, layout.height) - 2 * layout.margin
        self.scale /= span
        self.center = 0.5 * (low + high)
        self.drawing = svgwrite.Drawing(size=(layout.width, layout.height), profile="full",
                                        viewBox=f"0 0 {layout.width} {layout.height}")

    def to_screen(self, p: Sequence[float]) -> Tuple[float, float]:
        x = 0.5 * self.layout.width + (p[0] - self.center[0]) * self.scale
        y = 0.5 * self.layout.height - (p[1] - self.center[1]) * self.scale
        return round(float(x), 6), round(float(y), 6)

    def _polyline(self, points: Iterable[Sequence[float]], closed: bool = False) -> str:
        coords = [self.to_screen(p) for p in points]
        parts = [f"M {coords[0][0]:.6f} {coords[0][1]:.6f}"]
        parts.extend(f"L {x:.6f} {y:.6f}" for x, y in coords[1:])
        if closed:
            parts.append("Z")
        return " ".join(parts)

    def draw_boundary(self) -> None:
        dwg = self.drawing
        dwg.add(dwg.path(d=self._polyline(self.boundary, closed=True), class_="table",
                         fill="#f4f1e8", stroke="#333333", stroke_width=1.5))

    def draw_path(self, index: int, path: PolygonalPath) -> None:
        dwg = self.drawing
        color = PATH_COLORS[index % len(PATH_COLORS)]
        dwg.add(dwg.path(d=self._polyline(path.nodes), id=f"path-{index}", class_="billiard-path",
                         fill="none", stroke=color, stroke_width=1))
        for point in path.points.reshape(-1, 2):
            dwg.add(dwg.circle(center=self.to_screen(point), r=self.layout.vertex_radius,
                               class_="vertex", fill=color))

    def draw_endpoint(self, label: str, p: Sequence[float]) -> None:
        dwg = self.drawing
        x, y = self.to_screen(p)
        dwg.add(dwg.circle(center=(x, y), r=self.layout.endpoint_radius, class_="endpoint", fill="#000000"))
        dwg.add(dwg.text(label, insert=(x + 7, y - 7), font_family=FONT, font_size=12))

    def draw_focus_labels(self, chain: FocusChain) -> None:
        dwg = self.drawing
        for point, (_, after) in zip(self.table_points(chain), chain.steps):
            x, y = self.to_screen(point)
            value = after.value
            text = "inf" if not np.isfinite(value) else f"{value:.6f}"
            dwg.add(dwg.text(f"f={text}", insert=(x + 6, y + 14), class_="focus",
                             font_family=FONT, font_size=10))

    def table_points(self, chain: FocusChain) -> np.ndarray:
        if not chain.records:
            return np.zeros((0, 2))
        return evaluate(self.table, np.array([r.s for r in chain.records]), 0)[0]

    def tostring(self) -> str:
        buffer = io.StringIO()
        self.drawing.write(buffer)
        return buffer.getvalue().rstrip() + "\n"


def render_svg(table: Table, paths: Sequence[PolygonalPath] = (), x: Optional[Sequence[float]] = None,
               y: Optional[Sequence[float]] = None, chains: Sequence[FocusChain] = (),
               layout: Layout = Layout()) -> str:
    """Deterministic SVG document: boundary, one path element per billiard path, vertices, endpoints"""
    renderer = SvgRenderer(table, layout)
    renderer.draw_boundary()
    for index, path in enumerate(paths):
        renderer.draw_path(index, path)
    for chain in chains:
        renderer.draw_focus_labels(chain)
    if x is not None:
        renderer.draw_endpoint("x", x)
    if y is not None:
        renderer.draw_endpoint("y", y)
    logger.debug(f"Rendered SVG with {len(paths)} paths")
    return renderer.tostring()
