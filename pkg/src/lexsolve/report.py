"""Record files, report writers and figures."""

from __future__ import annotations

import csv
import json
import os
from typing import Any, Iterable, Iterator, Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from lexsolve.case_model import dumps_record  # noqa: E402


def iter_records(path: str) -> Iterator[dict[str, Any]]:
    """Records from a line-delimited file, or from a single JSON document
    holding one record or a list of them."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if not stripped:
        return
    if stripped[0] == "[":
        yield from json.loads(text)
        return
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        first = json.loads(lines[0])
    except json.JSONDecodeError:
        # a pretty-printed single document
        yield json.loads(text)
        return
    yield first
    for ln in lines[1:]:
        yield json.loads(ln)


def read_records(path: str) -> list[dict[str, Any]]:
    return list(iter_records(path))


def write_records(path: str, records: Iterable[Mapping[str, Any]]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(dumps_record(r))
            fh.write("\n")
            n += 1
    return n


def write_json(path: str, obj: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def write_rows(path: str, header: Iterable[str], rows: Iterable[Iterable[Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow(["" if v is None else v for v in row])


# ---------------------------------------------------------------- figures

_STYLE = {
    "figure.dpi": 110,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _bar(ax, labels, values, title, ylabel):
    xs = range(len(labels))
    heights = [0.0 if v is None else v for v in values]
    bars = ax.bar(xs, heights, color="#4C72B0")
    for b, v in zip(bars, values):
        ax.annotate("n/a" if v is None else f"{v:.2f}", (b.get_x() + b.get_width() / 2, b.get_height()),
                    ha="center", va="bottom", fontsize=7)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    ax.set_ylabel(ylabel)


def _rate_value(v: Any) -> float | None:
    if isinstance(v, Mapping):
        return v.get("value")
    return v


def render_figures(report: Mapping[str, Any], out_dir: str, prefix: str = "report") -> list[str]:
    """Bar charts of the per-family and per-attack breakdowns; returns written paths."""
    written = []
    breakdowns = report.get("breakdowns", {})
    with plt.rc_context(_STYLE):
        families = breakdowns.get("family", {})
        if families:
            names = sorted(families)
            fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
            inv = [_rate_value(families[n].get("invariance")) for n in names]
            align = [_rate_value(families[n].get("change_alignment")) for n in names]
            _bar(axes[0], names, inv, "Invariance by family", "rate")
            _bar(axes[1], names, align, "Change alignment by family", "rate")
            fig.tight_layout()
            path = os.path.join(out_dir, f"{prefix}_families.png")
            fig.savefig(path, metadata={"Software": None})
            plt.close(fig)
            written.append(path)
        attacks = breakdowns.get("attack_template", {})
        if attacks:
            names = sorted(attacks)
            fig, ax = plt.subplots(figsize=(5, 3.4))
            _bar(ax, names, [_rate_value(attacks[n].get("asr")) for n in names], "Attack success rate", "ASR")
            fig.tight_layout()
            path = os.path.join(out_dir, f"{prefix}_attacks.png")
            fig.savefig(path, metadata={"Software": None})
            plt.close(fig)
            written.append(path)
        clusters = breakdowns.get("cluster", {})
        if clusters:
            names = sorted(clusters)
            fig, ax = plt.subplots(figsize=(max(5, 0.5 * len(names)), 3.4))
            _bar(ax, names, [_rate_value(clusters[n].get("exactness")) for n in names], "Cluster exactness", "rate")
            fig.tight_layout()
            path = os.path.join(out_dir, f"{prefix}_clusters.png")
            fig.savefig(path, metadata={"Software": None})
            plt.close(fig)
            written.append(path)
    return written
