"""CSV and SVG emission for experiment results."""
import csv
import math
import os
from xml.sax.saxutils import escape

import numpy as np

from ..errors import MetricMissing
from ..metrics import MetricTrace

TRACE_HEADER = ("run_id", "algo", "target", "family", "seed", "outer_t", "score_calls",
                "metric", "value")
AGG_HEADER = ("algo", "schedule", "S", "beta", "metric", "n_seeds", "mean", "std")
INDEX_HEADER = ("run_id", "algo", "schedule", "S", "beta", "seed", "status", "message")

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
            "#7f7f7f", "#bcbd22", "#17becf")


def _fmt(x):
    # repr gives the shortest string that round-trips a float
    return repr(float(x))


def _traces(results):
    return [getattr(r, "trace", r) for r in results]


def _writer(path):
    fh = open(path, "w", encoding="utf-8", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_csv(results, path):
    """Long-format trace rows for all results, sorted by (run_id, outer_t, metric)."""
    rows = []
    for tr in _traces(results):
        for t, calls, metric, value in tr.rows:
            rows.append((tr.run_id, tr.algo, tr.target, tr.family, str(tr.seed), t, calls,
                         metric, value))
    rows.sort(key=lambda r: (r[0], r[5], r[7]))
    fh, w = _writer(path)
    with fh:
        w.writerow(TRACE_HEADER)
        for r in rows:
            w.writerow(r[:5] + (str(r[5]), str(r[6]), r[7], _fmt(r[8])))


def read_csv(path):
    """Traces back from a write_csv file, keyed by run_id in file order."""
    traces = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != TRACE_HEADER:
            raise ValueError(f"{path} is not a trace CSV")
        for rid, algo, target, family, seed, t, calls, metric, value in reader:
            tr = traces.get(rid)
            if tr is None:
                tr = traces[rid] = MetricTrace(run_id=rid, algo=algo, target=target,
                                               family=family, seed=int(seed))
            tr.rows.append((int(t), int(calls), metric, float(value)))
    for tr in traces.values():
        tr.rows.sort(key=lambda r: (r[1], r[0], r[2]))
    return list(traces.values())


def aggregate_rows(results):
    """(algo, schedule, S, beta, metric, n, mean, std) over completed seeds of each setting."""
    groups = {}
    for r in results:
        if r.status != "completed":
            continue
        for metric, value in r.final_metrics.items():
            groups.setdefault(r.variant.group + (metric,), []).append(value)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        v = np.array(groups[key])
        out.append(key + (len(v), float(np.mean(v)), float(np.std(v))))
    return out


def write_aggregate(results, path):
    fh, w = _writer(path)
    with fh:
        w.writerow(AGG_HEADER)
        for algo, sched, S, beta, metric, n, mean, std in aggregate_rows(results):
            w.writerow((algo, sched, str(S), _fmt(beta), metric, str(n), _fmt(mean), _fmt(std)))


def write_index(results, path):
    fh, w = _writer(path)
    with fh:
        w.writerow(INDEX_HEADER)
        for r in results:
            v = r.variant
            w.writerow((r.run_id, v.algo, v.schedule, str(v.S), _fmt(v.beta), str(v.seed),
                        r.status, r.message.replace("\n", " ")))


def write_outputs(results, out_dir):
    """Per-run CSVs under runs/, plus traces.csv, aggregate.csv and index.csv."""
    run_dir = os.path.join(out_dir, "runs")
    os.makedirs(run_dir, exist_ok=True)
    for r in results:
        write_csv([r], os.path.join(run_dir, f"{r.run_id}.csv"))
    write_csv(results, os.path.join(out_dir, "traces.csv"))
    write_aggregate(results, os.path.join(out_dir, "aggregate.csv"))
    write_index(results, os.path.join(out_dir, "index.csv"))


# ---------------------------------------------------------------- svg

def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        return [float(e) for e in range(a, b + 1)]
    return list(np.linspace(lo, hi, 5))


def render_convergence_svg(traces, metric, path, width=640, height=420, title=None):
    """Line chart of ``metric`` against cumulative score calls, one polyline per (algo, seed)."""
    traces = _traces(traces)
    series = []
    for tr in traces:
        _, calls, vals = tr.series(metric)
        if vals.size == 0:
            raise MetricMissing(f"run {tr.run_id or '?'} has no {metric!r} values")
        series.append((tr.algo, tr.seed, calls.astype(float), vals))
    if not series:
        raise MetricMissing(f"no traces to plot for {metric!r}")
    allv = np.concatenate([s[3] for s in series])
    allx = np.concatenate([s[2] for s in series])
    log = bool(np.all(allv > 0) and np.all(np.isfinite(allv)))
    ys = [np.log10(s[3]) if log else s[3] for s in series]
    yall = np.concatenate(ys)
    fin = yall[np.isfinite(yall)]
    ylo, yhi = (float(fin.min()), float(fin.max())) if fin.size else (0.0, 1.0)
    if log:
        ylo, yhi = math.floor(ylo), math.ceil(yhi)
    if yhi - ylo < 1e-12:
        ylo, yhi = ylo - 1.0, yhi + 1.0
    xlo, xhi = float(allx.min()), float(allx.max())
    if xhi - xlo < 1e-12:
        xhi = xlo + 1.0
    ml, mr, mt, mb = 70, 150, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - xlo) / (xhi - xlo) * pw

    def py(y):
        return mt + (1.0 - (y - ylo) / (yhi - ylo)) * ph

    algos = []
    for algo, *_ in series:
        if algo not in algos:
            algos.append(algo)
    color = {a: _PALETTE[i % len(_PALETTE)] for i, a in enumerate(algos)}

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    if title:
        out.append(f'<text x="{ml + pw / 2:.1f}" y="{mt - 15}" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    for y in _ticks(ylo, yhi, log):
        label = f"1e{int(y)}" if log else f"{y:.3g}"
        out.append(f'<line x1="{ml - 4}" y1="{py(y):.2f}" x2="{ml}" y2="{py(y):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py(y) + 4:.2f}" text-anchor="end" font-size="11">{label}</text>')
    for x in np.linspace(xlo, xhi, 5):
        out.append(f'<line x1="{px(x):.2f}" y1="{mt + ph}" x2="{px(x):.2f}" y2="{mt + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{px(x):.2f}" y="{mt + ph + 18}" text-anchor="middle" font-size="11">{x:.4g}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" '
               f'font-size="12">number of score calls</text>')
    ylabel = f"{metric} (log scale)" if log else metric
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')
    for (algo, seed, x, _), y in zip(series, ys):
        ok = np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        out.append(f'<polyline class="series" data-algo="{escape(algo)}" data-seed="{seed}" '
                   f'fill="none" stroke="{color[algo]}" stroke-width="1.2" points="{pts}"/>')
    for i, algo in enumerate(algos):
        ly = mt + 10 + 18 * i
        out.append(f'<g class="legend-entry"><line x1="{ml + pw + 12}" y1="{ly}" x2="{ml + pw + 32}" '
                   f'y2="{ly}" stroke="{color[algo]}" stroke-width="2"/>'
                   f'<text x="{ml + pw + 38}" y="{ly + 4}" font-size="11">{escape(algo)}</text></g>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
