"""CSV / JSONL / JSON writers for trajectories, samples, reports and plot data"""
import csv
import hashlib
import json
import logging
import os
from contextlib import contextmanager
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from utils.errors import OutputError

logger = logging.getLogger(__name__)

TRACE_HISTOGRAM_BINS = 50
TRACE_HISTOGRAM_RANGE = (-1.0, 3.0)


def config_sha256(cfg: BaseModel) -> str:
    """sha256 of the canonical (sorted-key) JSON form of a config"""
    canonical = json.dumps(cfg.model_dump(mode='json'), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _fmt(x) -> str:
    return repr(float(x))


@contextmanager
def _open_for_write(path: str):
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            yield f
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}") from e
    logger.debug("wrote %s", path)


def group_columns(shape: Tuple[int, ...], complex_entries: bool) -> List[str]:
    """g_ij row-major (g_i for R^n); complex entries split into _re / _im"""
    if len(shape) == 1:
        return [f"g_{i}" for i in range(shape[0])]
    names = []
    for i in range(shape[0]):
        for j in range(shape[1]):
            if complex_entries:
                names.extend([f"g_{i}{j}_re", f"g_{i}{j}_im"])
            else:
                names.append(f"g_{i}{j}")
    return names


def _group_values(g: np.ndarray, complex_entries: bool) -> List[str]:
    flat = np.asarray(g).ravel()
    if complex_entries:
        out = []
        for z in flat:
            out.extend([_fmt(z.real), _fmt(z.imag)])
        return out
    return [_fmt(np.real(z)) for z in flat]


def trajectory_columns(record) -> List[str]:
    complex_entries = record.descriptor.scalar_field == 'complex'
    d = record.descriptor.dimension
    return (['t'] + group_columns(record.descriptor.shape, complex_entries)
            + [f"m_{i + 1}" for i in range(d)] + ['energy', 'casimir', 'defect'])


def write_trajectory_csv(record, path: str, config_hash: str) -> str:
    """
    Trajectory CSV: a `# config_sha256=<hex>` line, then
    t, g entries, m_1..m_d, energy, casimir, defect.
    """
    complex_entries = record.descriptor.scalar_field == 'complex'
    with _open_for_write(path) as f:
        f.write(f"# config_sha256={config_hash}\n")
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(trajectory_columns(record))
        for k in range(len(record)):
            writer.writerow(
                [_fmt(record.times[k])]
                + _group_values(record.g[k], complex_entries)
                + [_fmt(x) for x in record.m[k]]
                + [_fmt(record.energy[k]), _fmt(record.casimir[k]), _fmt(record.defect[k])]
            )
    return path


def write_trajectory_jsonl(record, path: str, config_hash: str) -> str:
    """JSONL: first line metadata, then one object per recorded sample"""
    complex_entries = record.descriptor.scalar_field == 'complex'
    with _open_for_write(path) as f:
        meta = {'config_sha256': config_hash, 'group': record.descriptor.label,
                'columns': trajectory_columns(record), **record.metadata}
        f.write(json.dumps(meta, sort_keys=True) + '\n')
        for k in range(len(record)):
            g = np.asarray(record.g[k])
            row = {
                't': float(record.times[k]),
                'g': [[z.real, z.imag] for z in g.ravel()] if complex_entries else np.real(g).ravel().tolist(),
                'm': record.m[k].tolist(),
                'energy': float(record.energy[k]),
                'casimir': float(record.casimir[k]),
                'defect': float(record.defect[k]),
            }
            f.write(json.dumps(row) + '\n')
    return path


def write_rbm_csv(points: Sequence, path: str, config_hash: str) -> str:
    """Brownian path CSV: t, g entries, defect"""
    if not points:
        raise OutputError("empty path")
    descriptor = points[0][1].descriptor
    complex_entries = descriptor.scalar_field == 'complex'
    with _open_for_write(path) as f:
        f.write(f"# config_sha256={config_hash}\n")
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['t'] + group_columns(descriptor.shape, complex_entries) + ['defect'])
        for t, g in points:
            writer.writerow([_fmt(t)] + _group_values(g.matrix, complex_entries) + [_fmt(g.defect())])
    return path


def write_table_csv(columns: Sequence[str], rows: Iterable[Sequence[float]], path: str,
                    config_hash: str) -> str:
    """Generic numeric table with the config hash header"""
    with _open_for_write(path) as f:
        f.write(f"# config_sha256={config_hash}\n")
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(list(columns))
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path


def write_report_json(report, path: str) -> str:
    """pydantic model (or list of models / plain dict) as indented JSON"""
    if isinstance(report, BaseModel):
        payload = report.model_dump(mode='json')
    elif isinstance(report, list):
        payload = [r.model_dump(mode='json') if isinstance(r, BaseModel) else r for r in report]
    else:
        payload = report
    with _open_for_write(path) as f:
        json.dump(payload, f, indent=2, sort_keys=False)
        f.write('\n')
    return path


def emit_plot_data(record, path: str, series: Sequence[str] = ('energy', 'casimir', 'defect')) -> str:
    """Tidy long-format CSV: t, series, value"""
    with _open_for_write(path) as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['t', 'series', 'value'])
        for name in series:
            values = getattr(record, name)
            for t, v in zip(record.times, values):
                writer.writerow([_fmt(t), name, _fmt(v)])
    return path


def emit_trace_histogram(traces, path: str, bins: int = TRACE_HISTOGRAM_BINS,
                         value_range: Tuple[float, float] = TRACE_HISTOGRAM_RANGE) -> str:
    """
    Binned counts of Re tr g: bin_left, bin_right, count.

    Accepts a TrajectoryRecord (traces of its g samples) or an array of traces.
    """
    if hasattr(traces, 'g') and hasattr(traces, 'times'):
        g = np.asarray(traces.g)
        traces = np.real(np.trace(g, axis1=1, axis2=2)) if g.ndim == 3 and len(g) else np.empty(0)
    counts, edges = np.histogram(np.asarray(traces, dtype=float), bins=bins, range=value_range)
    with _open_for_write(path) as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['bin_left', 'bin_right', 'count'])
        for left, right, c in zip(edges[:-1], edges[1:], counts):
            writer.writerow([_fmt(left), _fmt(right), int(c)])
    return path
