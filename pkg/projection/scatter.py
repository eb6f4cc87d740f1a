"""Plot-ready scatter output for 2-D layouts: CSV rows and a standalone SVG."""
import csv
import logging
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure

from embeddings.exceptions import DimMismatch

logger = logging.getLogger(__name__)

SCATTER_FIELDS = ['id', 'x', 'y', 'label']

CLASS_COLORS = {
    'normal': 'red',
    'benign': 'green',
    'in-situ': 'purple',
    'invasive': 'blue',
}


def _label_text(label) -> str:
    return getattr(label, 'label', str(label))


def write_scatter_csv(ids, layout, labels, path) -> Path:
    if not len(ids) == len(layout) == len(labels):
        raise DimMismatch(f"{len(ids)} ids, {len(layout)} points and {len(labels)} labels")
    path = Path(path)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(SCATTER_FIELDS)
        for point_id, (x, y), label in zip(ids, layout, labels):
            writer.writerow([point_id, f"{x:.6f}", f"{y:.6f}", _label_text(label)])
    return path


def write_scatter_svg(layout, labels, path, title='') -> Path:
    """One colour per tissue class; the file carries no timestamp and stable element ids"""
    path = Path(path)
    names = [_label_text(label) for label in labels]
    figure = Figure(figsize=(6, 6))
    axes = figure.subplots()
    for name in sorted(set(names), key=lambda n: list(CLASS_COLORS).index(n) if n in CLASS_COLORS else 99):
        points = [p for p, n in zip(layout, names) if n == name]
        axes.scatter([p[0] for p in points], [p[1] for p in points], s=12,
                     color=CLASS_COLORS.get(name, 'gray'), label=name)
    axes.set_xticks([])
    axes.set_yticks([])
    if title:
        axes.set_title(title)
    axes.legend(loc='best', fontsize='small')
    with matplotlib.rc_context({'svg.hashsalt': 'dupless', 'svg.fonttype': 'none'}):
        figure.savefig(path, format='svg', metadata={'Date': None})
    logger.debug(f"Wrote scatter plot {path}")
    return path
