"""Static SVG charts and CSV tables rendered from an analysis report."""
from __future__ import annotations

import csv
import os
from datetime import datetime, timezone
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.dates as mdates  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402

GOS_KEYS = ("p50", "p80", "p90", "p95", "p98", "p100")
# deterministic SVG output (no random ids, no date stamp)
_SVG_RC = {"svg.hashsalt": "tailsig", "svg.fonttype": "none"}


class ReportError(ValueError):
    pass


def _ts(ms: int) -> datetime:
    return datetime.fromtimestamp(ms / 1000.0, tz=timezone.utc)


def validate_report(report) -> None:
    if not isinstance(report, dict):
        raise ReportError("report must be a JSON object")
    for key in ("windows", "events", "distributions"):
        if key not in report:
            raise ReportError(f"report lacks {key!r}")
    starts = set()
    for w in report["windows"]:
        if not isinstance(w, dict) or "window_start" not in w:
            raise ReportError("window entries need a window_start")
        starts.add(w["window_start"])
    for e in report["events"]:
        if e.get("window_start") not in starts:
            raise ReportError(f"event at {e.get('window_start')} references no window")


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def trend_chart(report: dict, parameter: str, path: Path) -> int:
    """Line chart of ``k`` or ``j`` per window; returns the number of event markers."""
    windows = [w for w in report["windows"] if w.get(parameter) is not None]
    by_start = {w["window_start"]: w for w in windows}
    fig, ax = plt.subplots(figsize=(10, 3.5))
    ax.plot([_ts(w["window_start"]) for w in windows], [w[parameter] for w in windows],
            color="tab:blue", lw=1.2, marker=".", ms=3, gid=f"{parameter}-trend")
    markers = 0
    for i, e in enumerate(report["events"]):
        w = by_start.get(e["window_start"])
        if w is None:
            continue
        color = "tab:red" if e.get("alert") else "tab:orange"
        ax.plot([_ts(w["window_start"])], [w[parameter]], marker="v", ms=9, color=color,
                linestyle="none", gid=f"event-{i}")
        markers += 1
    ax.set_ylabel(parameter)
    ax.set_title(f"{parameter} by window")
    ax.xaxis.set_major_formatter(mdates.DateFormatter("%H:%M"))
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
    return markers


def gos_chart(report: dict, path: Path) -> None:
    windows = [w for w in report["windows"] if w.get("gos")]
    fig, ax = plt.subplots(figsize=(10, 4))
    xs = [_ts(w["window_start"]) for w in windows]
    for key in GOS_KEYS:
        ax.plot(xs, [w["gos"][key] for w in windows], lw=1, label=key, gid=f"gos-{key}")
    ax.set_yscale("log")
    ax.set_ylabel("response time (ms)")
    ax.set_title("Grade of service by window")
    ax.xaxis.set_major_formatter(mdates.DateFormatter("%H:%M"))
    ax.legend(ncol=6, fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    _save(fig, path)


def distribution_chart(rows: list, parameter: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    if rows:
        lows = [r["bin_low"] for r in rows]
        widths = [r["bin_high"] - r["bin_low"] for r in rows]
        ax.bar(lows, [r["probability"] for r in rows], width=widths, align="edge",
               edgecolor="black", color="tab:gray")
    ax.set_xlim(-1, 1)
    ax.set_xlabel(f"normalised change in {parameter}")
    ax.set_ylabel("probability")
    ax.set_title(f"Distribution of changes in {parameter}")
    fig.tight_layout()
    _save(fig, path)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _blank(v):
    return "" if v is None else v


def render_report(report: dict, out_dir) -> dict[str, Path]:
    """Write charts and CSV tables for ``report`` into ``out_dir``."""
    validate_report(report)
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    written: dict[str, Path] = {}

    with plt.rc_context(_SVG_RC):
        for param in ("k", "j"):
            p = out / f"{param}_trend.svg"
            trend_chart(report, param, p)
            written[p.name] = p
        p = out / "gos.svg"
        gos_chart(report, p)
        written[p.name] = p
        for param in ("k", "j"):
            p = out / f"distribution_{param}.svg"
            distribution_chart(report["distributions"].get(param) or [], param, p)
            written[p.name] = p

    p = out / "trend.csv"
    _write_csv(p, ["window_start", "fittable", "converged", "n_points", "k", "j", "sse"],
               [[w["window_start"], w.get("fittable"), w.get("converged"), w.get("n_points"),
                 _blank(w.get("k")), _blank(w.get("j")), _blank(w.get("sse"))] for w in report["windows"]])
    written[p.name] = p

    p = out / "gos.csv"
    _write_csv(p, ["window_start", "arrival_rate", *GOS_KEYS],
               [[w["window_start"], *((w["gos"]["arrival_rate"], *(w["gos"][k] for k in GOS_KEYS))
                                      if w.get("gos") else [0] + [""] * len(GOS_KEYS))]
                for w in report["windows"]])
    written[p.name] = p

    for param in ("k", "j"):
        p = out / f"distribution_{param}.csv"
        _write_csv(p, ["bin_low", "bin_high", "count", "probability"],
                   [[r["bin_low"], r["bin_high"], r["count"], r["probability"]]
                    for r in report["distributions"].get(param) or []])
        written[p.name] = p

    p = out / "events.csv"
    cols = ["window_start", "kind", "delta_k_norm", "delta_j_norm", "bin_probability", "significance", "alert"]
    _write_csv(p, cols, [[e.get(c) for c in cols] for e in report["events"]])
    written[p.name] = p
    return written
