"""Summaries of simulate run directories."""

from __future__ import annotations

import json
import math
from pathlib import Path

from ..solver import DiagnosticsRecord
from .csvio import CSVParseError, read_table, write_table

DIAGNOSTICS_SCHEMA = "micropolar-diagnostics"
DIAGNOSTICS_FILE = "diagnostics.csv"
META_FILE = "run.json"


class ReportError(RuntimeError):
    pass


def load_run(run_dir):
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ReportError(f"{run_dir} is not a directory")
    path = run_dir / DIAGNOSTICS_FILE
    if not path.is_file():
        raise ReportError(f"{run_dir} has no {DIAGNOSTICS_FILE}")
    table = read_table(path, DIAGNOSTICS_SCHEMA)
    missing = [c for c in DiagnosticsRecord.COLUMNS if c not in table.columns]
    if missing:
        raise CSVParseError(path, 2, f"missing columns {missing}")
    for offset, row in enumerate(table.rows):
        bad = [c for c, x in zip(table.columns, row) if not isinstance(x, (int, float))]
        if bad:
            raise CSVParseError(path, offset + 3, f"non-numeric value in column {bad[0]!r}")
    if not table.rows:
        raise ReportError(f"{path} holds no records")
    meta_path = run_dir / META_FILE
    meta = json.loads(meta_path.read_text()) if meta_path.is_file() else {}
    return table, meta


def summarize(run_dir):
    """(text, stats) for a run; also writes summary.txt and monitor.csv into the run dir."""
    run_dir = Path(run_dir)
    table, meta = load_run(run_dir)
    col = table.column
    t = col("t")
    monitor = col("monitor")
    crossed = any(int(x) for x in col("gamma_crossed"))
    blowup = any(int(x) for x in col("blowup"))
    eta = meta.get("eta", math.nan)
    i_max = max(range(len(monitor)), key=monitor.__getitem__)
    cross_t = next((ti for ti, c in zip(t, col("gamma_crossed")) if int(c)), None)
    stats = {
        "records": len(t),
        "t_final": t[-1],
        "eta": eta,
        "max_monitor": monitor[i_max],
        "t_max_monitor": t[i_max],
        "max_u_linf": max(col("u_linf")),
        "dissipation_integral": col("dissipation_integral")[-1],
        "max_div_u": max(col("div_u")),
        "max_div_v": max(col("div_v")),
        "gamma_crossed": crossed,
        "crossing_time": cross_t,
        "blowup": blowup,
    }
    if blowup:
        verdict = f"blowup after t = {t[-1]:.6g}"
    elif crossed:
        verdict = f"Γ-crossing at t = {cross_t:.6g}, no blowup"
    else:
        verdict = "no Γ-crossing, no blowup"
    stats["verdict"] = verdict
    lines = [f"run: {run_dir.name}"]
    for key in ("mode", "eps", "p", "dims", "dt", "t_end", "scheme"):
        if key in meta:
            lines.append(f"{key}: {meta[key]}")
    lines += [
        f"records: {stats['records']} (t_final = {stats['t_final']:.6g})",
        f"eta: {eta:.6e}",
        f"max monitor: {stats['max_monitor']:.6e} at t = {stats['t_max_monitor']:.6g}",
        f"monitor / eta: {stats['max_monitor'] / eta:.6e}" if eta and math.isfinite(eta) else "monitor / eta: n/a",
        f"dissipation integral: {stats['dissipation_integral']:.6e}",
        f"max |u|_Linf: {stats['max_u_linf']:.6e}",
        f"max div residual: u {stats['max_div_u']:.3e}, v {stats['max_div_v']:.3e}",
        f"verdict: {verdict}",
    ]
    text = "\n".join(lines) + "\n"
    (run_dir / "summary.txt").write_text(text)
    write_table(
        run_dir / "monitor.csv",
        "micropolar-monitor",
        ("t", "monitor", "eta", "monitor_over_eta"),
        [(ti, mi, float(eta), mi / eta if eta else math.nan) for ti, mi in zip(t, monitor)],
    )
    return text, stats
