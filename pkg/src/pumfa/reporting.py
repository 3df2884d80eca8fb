"""File reports: CSV/text tables plus matplotlib figures rendered to disk.

Everything here is presentation only; numbers are computed upstream. Metric
tables report in units of 1e-3 to match upsampling-benchmark convention.
"""

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

HISTORY_FIELDS = ("step", "epoch", "alpha", "loss", "cd_qp_d", "cd_q_d", "dcd_q_d")


def write_train_log(history, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in HISTORY_FIELDS})


def plot_loss_curve(history, path):
    steps = [row["step"] for row in history]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for key, label in (("loss", "total loss"), ("cd_q_d", "CD(Q, D)"),
                       ("dcd_q_d", "DCD(Q, D)")):
        ax.plot(steps, [row[key] for row in history], label=label)
    ax.set_xlabel("optimizer step")
    ax.set_ylabel("value")
    ax.set_yscale("log")
    ax.legend()
    ax.set_title("training curves")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _fmt_level(level):
    return f"{level:g}"


def write_metrics_csv(result, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["shape", "noise_level", "cd_1e3", "hd_1e3", "p2f_1e3"])
        for row in result.rows:
            writer.writerow([
                row.shape,
                _fmt_level(row.noise),
                f"{row.cd * 1e3:.6f}",
                f"{row.hd * 1e3:.6f}",
                f"{row.p2f * 1e3:.6f}",
            ])


def write_metrics_table(result, path):
    """Pivoted text table: one block per metric, one column per noise level."""
    levels = list(result.noise_levels)
    shapes = result.shapes()
    agg = result.aggregate()
    by_key = {(r.shape, r.noise): r for r in result.rows}
    name_w = max(len("mean"), *(len(s) for s in shapes)) + 2
    col_w = max(10, *(len(_fmt_level(v)) + 2 for v in levels))

    lines = []
    for metric in ("cd", "hd", "p2f"):
        lines.append(f"{metric.upper()} (1e-3) by noise level")
        header = "shape".ljust(name_w)
        header += "".join(_fmt_level(v).rjust(col_w) for v in levels)
        lines.append(header)
        for shape in shapes:
            line = shape.ljust(name_w)
            for level in levels:
                value = getattr(by_key[(shape, level)], metric) * 1e3
                line += f"{value:.4f}".rjust(col_w)
            lines.append(line)
        line = "mean".ljust(name_w)
        for level in levels:
            line += f"{agg[level][metric] * 1e3:.4f}".rjust(col_w)
        lines.append(line)
        lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def plot_cd_vs_noise(result, path):
    levels = list(result.noise_levels)
    agg = result.aggregate()
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for shape in result.shapes():
        rows = {r.noise: r for r in result.rows if r.shape == shape}
        ax.plot(levels, [rows[v].cd * 1e3 for v in levels], marker="o",
                alpha=0.6, label=shape)
    ax.plot(levels, [agg[v]["cd"] * 1e3 for v in levels], marker="s",
            color="black", linewidth=2, label="mean")
    ax.set_xlabel("noise sigma")
    ax.set_ylabel("CD (1e-3)")
    ax.set_title("degradation under input noise")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_attention_csv(report, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "head", "rank", "point_index", "mean_score"])
        for layer in report.layers:
            for entry in layer.heads:
                mean = entry.mean_scores()
                for rank, idx in enumerate(entry.top_indices):
                    writer.writerow([
                        layer.layer, entry.head, rank, int(idx),
                        f"{mean[int(idx)]:.8f}",
                    ])


def plot_attention_overlay(report, path):
    """Scatter grid, one row per decoder layer, one column per dumped head;
    top-k points drawn on top in a highlight color."""
    n_layers = len(report.layers)
    n_heads = max(len(layer.heads) for layer in report.layers)
    fig, axes = plt.subplots(
        n_layers, n_heads,
        figsize=(2.6 * n_heads, 2.6 * n_layers),
        squeeze=False,
    )
    pts = report.points
    for li, layer in enumerate(report.layers):
        for hi, entry in enumerate(layer.heads):
            ax = axes[li][hi]
            ax.scatter(pts[:, 0], pts[:, 1], s=4, color="0.75")
            top = entry.top_indices
            ax.scatter(pts[top, 0], pts[top, 1], s=12, color="crimson")
            ax.set_title(f"layer {layer.layer} head {entry.head}", fontsize=8)
            ax.set_aspect("equal")
            ax.set_xticks([])
            ax.set_yticks([])
        for hi in range(len(layer.heads), n_heads):
            axes[li][hi].axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _average_ranks(values):
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y):
    """Rank correlation with average ranks on ties; 0.0 when either input
    is constant (no ordering to correlate)."""
    if len(x) != len(y):
        raise ValueError("length mismatch")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    sx, sy = rx.std(), ry.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(((rx - rx.mean()) * (ry - ry.mean())).mean() / (sx * sy))
