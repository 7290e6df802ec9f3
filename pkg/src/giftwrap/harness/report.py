"""Report rendering: deterministic CSV tables, a markdown summary with the
published real-robot numbers alongside for visual comparison, and matplotlib
figures (force profiles, integrity breakdown) written next to the tables."""

from __future__ import annotations

import csv
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .ablation import VariantSummary, paired_permutation_p
from .episode import EpisodeResult

# published real-robot reference rows (UR3e hardware), kept for side-by-side
# trend comparison only; this repo reproduces directions, not magnitudes
REFERENCE_ROWS = [
    ("full framework (real robot)", "task success", "97%"),
    ("no sub-task id (real robot)", "task success", "35%"),
    ("no F/T input (real robot)", "mean force", "+115%"),
    ("manual transition (real robot)", "task success", "67%"),
    ("position only (real robot)", "task success", "90% (vs 97%)"),
    ("unified (real robot)", "success / time / peak force", "97% / 170 s / 16.1 N"),
    ("modular (real robot)", "success / time / peak force", "90% / 175 s / 18.6 N"),
]


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def episode_table(result: EpisodeResult) -> tuple[list[str], list[list]]:
    header = ["success", "pi", "T", "W", "E", "duration_s", "peak_force_n",
              "mean_force_n", "timeouts"]
    row = [int(result.success), _fmt(result.pi), _fmt(result.scores.T),
           _fmt(result.scores.W), _fmt(result.scores.E),
           _fmt(result.duration_s), _fmt(result.peak_force),
           _fmt(result.mean_force), result.timeouts]
    return header, [row]


def ablation_table(summaries: dict[str, VariantSummary]
                   ) -> tuple[list[str], list[list]]:
    header = ["variant", "episodes", "success_rate", "mean_pi", "mean_force_n",
              "peak_force_n", "mean_duration_s", "timeout_rate",
              "boundary_failures", "matched_seed_hash"]
    rows = []
    for v in sorted(summaries):
        s = summaries[v]
        rows.append([s.variant, s.episodes, _fmt(s.success_rate),
                     _fmt(s.mean_pi), _fmt(s.mean_force), _fmt(s.peak_force),
                     _fmt(s.mean_duration), _fmt(s.timeout_rate),
                     s.boundary_failures, s.trace_hash])
    return header, rows


def significance_table(summaries: dict[str, VariantSummary],
                       baseline: str = "full") -> tuple[list[str], list[list]]:
    header = ["comparison", "metric", "baseline_mean", "variant_mean", "p_value"]
    rows = []
    if baseline not in summaries:
        return header, rows
    base = summaries[baseline]
    for v, s in sorted(summaries.items()):
        if v == baseline:
            continue
        n = min(len(base.per_seed_success), len(s.per_seed_success))
        rows.append([f"{baseline}>{v}", "success",
                     _fmt(base.success_rate), _fmt(s.success_rate),
                     _fmt(paired_permutation_p(base.per_seed_success[:n],
                                               s.per_seed_success[:n]))])
        rows.append([f"{v}>{baseline}", "mean_force",
                     _fmt(base.mean_force), _fmt(s.mean_force),
                     _fmt(paired_permutation_p(s.per_seed_force[:n],
                                               base.per_seed_force[:n]))])
        rows.append([f"{baseline}>{v}", "pi",
                     _fmt(base.mean_pi), _fmt(s.mean_pi),
                     _fmt(paired_permutation_p(base.per_seed_pi[:n],
                                               s.per_seed_pi[:n]))])
    return header, rows


def emit_report(out_dir: str, episode: EpisodeResult | None = None,
                summaries: dict[str, VariantSummary] | None = None,
                force_logs: dict[str, list] | None = None,
                title: str = "giftwrap report") -> list[str]:
    """Write CSV tables, a markdown summary and figures; returns the file
    list. CSV output is byte-stable across reruns on identical inputs."""
    os.makedirs(out_dir, exist_ok=True)
    files: list[str] = []

    md = [f"# {title}", ""]
    if episode is not None:
        header, rows = episode_table(episode)
        path = os.path.join(out_dir, "episode.csv")
        _write_csv(path, header, rows)
        files.append(path)
        md += ["## Episode", "", "| " + " | ".join(header) + " |",
               "|" + "---|" * len(header)]
        md += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
        md += ["", f"PI breakdown: T={episode.scores.T:.3f} "
               f"W={episode.scores.W:.3f} E={episode.scores.E:.3f} "
               f"-> PI={episode.pi:.3f}", ""]
        fig_path = os.path.join(out_dir, "episode_pi.png")
        _pi_figure(episode, fig_path)
        files.append(fig_path)

    if summaries:
        header, rows = ablation_table(summaries)
        path = os.path.join(out_dir, "ablation.csv")
        _write_csv(path, header, rows)
        files.append(path)
        sh, srires = significance_table(summaries)
        sig_path = os.path.join(out_dir, "significance.csv")
        _write_csv(sig_path, sh, srires)
        files.append(sig_path)
        md += ["## Ablation (this repo, simulation; matched seeds)", "",
               "| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        md += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
        md += ["", "### Published reference (real robot)", "",
               "| setting | metric | value |", "|---|---|---|"]
        md += [f"| {a} | {b} | {c} |" for a, b, c in REFERENCE_ROWS]
        md += [""]
        fig_path = os.path.join(out_dir, "ablation_success.png")
        _ablation_figure(summaries, fig_path)
        files.append(fig_path)

    if force_logs:
        fig_path = os.path.join(out_dir, "force_profile.png")
        _force_figure(force_logs, fig_path)
        files.append(fig_path)

    md_path = os.path.join(out_dir, "summary.md")
    with open(md_path, "w") as fh:
        fh.write("\n".join(md) + "\n")
    files.append(md_path)
    return files


def _pi_figure(episode: EpisodeResult, path: str) -> None:
    fig, ax = plt.subplots(figsize=(4.2, 3.0))
    labels = ["T (tear)", "W (wrinkle)", "E (edge)"]
    vals = [episode.scores.T, episode.scores.W, episode.scores.E]
    ax.bar(labels, vals, color=["#c0504d", "#f2c14e", "#4f81bd"])
    ax.axhline(1.0 - episode.pi, color="k", lw=0.8, ls="--",
               label=f"1 - PI = {1 - episode.pi:.3f}")
    ax.set_ylabel("defect score")
    ax.set_ylim(0, max(0.4, max(vals) * 1.3 + 1e-3))
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _ablation_figure(summaries: dict[str, VariantSummary], path: str) -> None:
    names = sorted(summaries)
    fig, axes = plt.subplots(1, 3, figsize=(9.5, 3.0))
    axes[0].bar(names, [summaries[v].success_rate for v in names], color="#4f81bd")
    axes[0].set_ylabel("success rate")
    axes[1].bar(names, [summaries[v].mean_force for v in names], color="#9bbb59")
    axes[1].set_ylabel("mean |force| (N)")
    axes[2].bar(names, [summaries[v].mean_pi for v in names], color="#8064a2")
    axes[2].set_ylabel("mean PI")
    for ax in axes:
        ax.tick_params(axis="x", rotation=40, labelsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _force_figure(force_logs: dict[str, list], path: str) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    for label, logs in force_logs.items():
        t = [l.time for l in logs]
        f = [l.force for l in logs]
        ax.plot(t, f, lw=0.9, label=label)
    ref = next(iter(force_logs.values()), [])
    if ref:
        ax.plot([l.time for l in ref], [l.f_desired for l in ref],
                "k--", lw=0.8, label="desired")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("|force| (N)")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
