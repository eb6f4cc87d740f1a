"""
Report writers.

- ``reports.json``: every report with its confusion matrix and folds
- ``sensitivity.csv``: long form ``extractor,method,level,class,sensitivity``
- ``comparison_table.csv``: patch-level sensitivities, one row per extractor
- ``slice_bars.csv``: slice-level sensitivities per extractor and class,
  one column per combination method
"""
import json
import math
from pathlib import Path

import pandas as pd

from .manifest import TissueClass

SUMMARY_FIELDS = ['extractor', 'method', 'level', 'class', 'sensitivity']
CLASS_COLUMNS = [c.label for c in TissueClass] + ['overall']
SLICE_METHODS = ['vote', 'concat', 'sum']
NOT_PROVIDED = 'not provided'


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ''
    return f"{value:.6f}"


def summary_rows(reports) -> list:
    rows = []
    for report in reports:
        entries = [(c.label, report.per_class[c]) for c in TissueClass] + [('overall', report.overall)]
        for name, value in entries:
            rows.append({'extractor': report.extractor, 'method': report.method, 'level': report.level,
                         'class': name, 'sensitivity': value})
    return rows


def write_reports_json(reports, path) -> Path:
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump([report.to_dict() for report in reports], f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def write_summary_csv(reports, path) -> Path:
    path = Path(path)
    frame = pd.DataFrame(summary_rows(reports), columns=SUMMARY_FIELDS)
    frame['sensitivity'] = frame['sensitivity'].map(_fmt)
    frame.to_csv(path, index=False, lineterminator='\n')
    return path


def comparison_table(reports, absent_extractors=()) -> pd.DataFrame:
    """Patch-level table: rows are extractors (first-seen order), columns the classes plus overall"""
    rows = [row for row in summary_rows(reports) if row['level'] == 'patch']
    frame = pd.DataFrame(rows, columns=SUMMARY_FIELDS)
    order = list(dict.fromkeys(frame['extractor']))
    table = frame.pivot_table(index='extractor', columns='class', values='sensitivity', aggfunc='first', dropna=False)
    table = table.reindex(index=order, columns=CLASS_COLUMNS).map(_fmt)
    for extractor in absent_extractors:
        if extractor not in table.index:
            table.loc[extractor] = [NOT_PROVIDED] * len(CLASS_COLUMNS)
    table.index.name = 'extractor'
    table.columns.name = None
    return table


def write_comparison_table(reports, path, absent_extractors=()) -> Path:
    path = Path(path)
    comparison_table(reports, absent_extractors).to_csv(path, lineterminator='\n')
    return path


def slice_bar_data(reports) -> pd.DataFrame:
    rows = [row for row in summary_rows(reports) if row['level'] == 'slice']
    frame = pd.DataFrame(rows, columns=SUMMARY_FIELDS)
    extractors = list(dict.fromkeys(frame['extractor']))
    table = frame.pivot_table(index=['extractor', 'class'], columns='method', values='sensitivity',
                              aggfunc='first', dropna=False)
    index = pd.MultiIndex.from_product([extractors, CLASS_COLUMNS], names=['extractor', 'class'])
    methods = [m for m in SLICE_METHODS if m in table.columns]
    table = table.reindex(index=index, columns=methods).map(_fmt)
    table.columns.name = None
    return table


def write_slice_bars(reports, path) -> Path:
    path = Path(path)
    slice_bar_data(reports).to_csv(path, lineterminator='\n')
    return path
