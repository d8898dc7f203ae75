"""Render report figures to files next to the delimited output.

The experiment harness itself only emits JSON + CSV; this module turns
those plot-ready artifacts into PNG summaries when the CLI report path is
invoked.  All rendering uses the Agg backend so it works headless.
"""

from __future__ import annotations

import math
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = ["render_figures"]

_RC = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def _terminal_values(rows, n: int, t: float, label: str | None = None):
    out = []
    for rep, rn, rt, v, norm in rows:
        if rn == n and abs(rt - t) < 1e-12 and (label is None or norm == label):
            out.append(v)
    return np.asarray(out)


def _series_by_n(report: dict, family_prefix: str = ""):
    """(n, moments) pairs at the terminal time from the report tables."""
    per_n = {}
    for key, mm in report["tables"].items():
        body = key
        if family_prefix:
            if not key.startswith(family_prefix + "|"):
                continue
            body = key.split("|", 1)[1]
        try:
            n_part, t_part = body.split(",")
            n = int(n_part.split("=")[1])
            t = float(t_part.split("=")[1])
        except (ValueError, IndexError):
            continue
        per_n.setdefault(n, {})[t] = mm
    out = []
    for n in sorted(per_n):
        t_last = max(per_n[n])
        out.append((n, per_n[n][t_last], t_last))
    return out


def _save(fig, outdir, name, made):
    target = os.path.join(outdir, name)
    fig.savefig(target, metadata={"Software": None})
    plt.close(fig)
    made.append(target)


def _fig_moments_vs_n(report, made, outdir, ylabel):
    data = _series_by_n(report)
    if len(data) < 1:
        return
    ns = [n for n, _, _ in data]
    means = [mm["mean"] for _, mm, _ in data]
    ses = [mm.get("se_mean", 0.0) for _, mm, _ in data]
    fig, ax = plt.subplots()
    ax.errorbar(ns, means, yerr=[3 * s for s in ses], fmt="o-", capsize=3,
                label="replicate mean (3 SE)")
    oracle = report.get("extras", {}).get("oracle")
    if oracle:
        t_last = data[0][2]
        val = oracle.get(f"t={t_last:g}")
        if val is not None:
            ax.axhline(val, color="crimson", ls="--", label=f"limit {val:.5f}")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("resolution n")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    _save(fig, outdir, "fig_mean_vs_n.png", made)


def _fig_exceedance(report, made, outdir):
    exc = report.get("extras", {}).get("exceedance")
    if not exc:
        return
    ns = [int(k) for k in exc["frequencies"]]
    fs = [exc["frequencies"][str(n)] for n in ns]
    fig, ax = plt.subplots()
    ax.plot(ns, fs, "s-")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("resolution n")
    ax.set_ylabel(f"P(|stat - limit| > {exc['epsilon']:g})")
    fig.tight_layout()
    _save(fig, outdir, "fig_exceedance.png", made)


def _fig_histogram(report, rows, made, outdir, label=None):
    data = _series_by_n(report)
    if not data:
        return
    n, mm, t_last = data[-1]
    vals = _terminal_values(rows, n, t_last, label)
    if vals.size < 10:
        return
    fig, ax = plt.subplots()
    ax.hist(vals, bins=max(10, int(math.sqrt(vals.size))), density=True,
            alpha=0.6, label=f"statistic at n={n}")
    if mm["sd"] > 0:
        xs = np.linspace(vals.min(), vals.max(), 300)
        pdf = np.exp(-0.5 * ((xs - mm["mean"]) / mm["sd"]) ** 2) / \
            (mm["sd"] * math.sqrt(2 * math.pi))
        ax.plot(xs, pdf, "crimson", label="fitted Gaussian")
    calib = report.get("extras", {}).get("constant_calibration", {})
    for form, cand in calib.get("candidates", {}).items():
        ax.axvline(cand["predicted_sd"], ls=":", alpha=0.8,
                   label=f"{form}-form predicted sd {cand['predicted_sd']:.3f}")
    ax.set_xlabel("statistic value")
    ax.set_ylabel("density")
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, outdir, "fig_histogram.png", made)


def _fig_variance_vs_n(report, made, outdir):
    data = _series_by_n(report)
    if len(data) < 2:
        return
    ns = [n for n, _, _ in data]
    variances = [mm["variance"] for _, mm, _ in data]
    fig, ax = plt.subplots()
    ax.plot(ns, variances, "o-")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("resolution n")
    ax.set_ylabel("replicate variance of the statistic")
    fig.tight_layout()
    _save(fig, outdir, "fig_variance_vs_n.png", made)


def _fig_cauchy(report, made, outdir):
    cauchy = report.get("extras", {}).get("cauchy")
    if not cauchy:
        return
    fig, ax = plt.subplots()
    for fam, ds in cauchy.items():
        js = sorted(int(j) for j in ds)
        d = [ds[str(j)]["d"] for j in js]
        se = [2 * ds[str(j)]["se"] for j in js]
        ax.errorbar(js, d, yerr=se, fmt="o-", capsize=3, label=fam)
    ax.set_yscale("log")
    ax.set_xlabel("dyadic level j  (d_j between resolutions 2^j and 2^{j+1})")
    ax.set_ylabel("L2 difference d_j")
    ax.legend()
    fig.tight_layout()
    _save(fig, outdir, "fig_dyadic_cauchy.png", made)


def _fig_slopes(report, made, outdir):
    tables = report.get("tables", {})
    ns, e_c, e_f = [], [], []
    for key, mm in sorted(tables.items()):
        if not key.startswith("n=") or "e_centered" not in mm:
            continue
        ns.append(int(key.split("=")[1]))
        e_c.append(mm["e_centered"])
        e_f.append(mm["e_full"])
    if len(ns) < 2:
        return
    order = np.argsort(ns)
    ns = np.asarray(ns)[order]
    fig, ax = plt.subplots()
    ax.loglog(ns, np.asarray(e_c)[order], "o-", label="centered cell integral")
    ax.loglog(ns, np.asarray(e_f)[order], "s-", label="full cell integral")
    ex = report.get("extras", {})
    for key, style in (("slope_full", "--"), ("slope_centered", ":")):
        if key in ex:
            ax.plot([], [], style, color="gray",
                    label=f"{key} = {ex[key]['value']:.3f}")
    ax.set_xlabel("resolution n")
    ax.set_ylabel("L2 norm")
    ax.legend()
    fig.tight_layout()
    _save(fig, outdir, "fig_lemma1_rates.png", made)


def _fig_lemma2(report, made, outdir):
    tables = report.get("tables", {})
    target = report.get("extras", {}).get("oracle")
    ns, errs = [], []
    for key, mm in tables.items():
        if "abs_error" in mm:
            ns.append(int(key.split(",")[0].split("=")[1]))
            errs.append(mm["abs_error"])
    if not ns or target is None:
        return
    order = np.argsort(ns)
    fig, ax = plt.subplots()
    ax.loglog(np.asarray(ns)[order], np.asarray(errs)[order], "o-")
    ax.set_xlabel("resolution n")
    ax.set_ylabel(f"|value - {target:.6f}|")
    fig.tight_layout()
    _save(fig, outdir, "fig_lemma2_error.png", made)


def render_figures(report: dict, rows, outdir) -> list[str]:
    """Write the figures for one experiment report; returns created paths."""
    made: list[str] = []
    exp = report.get("experiment", "")
    with plt.rc_context(_RC):
        if exp == "theorem1":
            _fig_moments_vs_n(report, made, outdir, "mean of n^{2H-1} J_n")
            _fig_exceedance(report, made, outdir)
            _fig_histogram(report, rows, made, outdir)
        elif exp in ("theorem2", "prop1"):
            _fig_histogram(report, rows, made, outdir)
            _fig_variance_vs_n(report, made, outdir)
        elif exp == "dyadic_cauchy":
            _fig_cauchy(report, made, outdir)
            _fig_histogram(report, rows, made, outdir, label="njn")
        elif exp == "lemma1_rates":
            _fig_slopes(report, made, outdir)
        elif exp == "lemma2":
            _fig_lemma2(report, made, outdir)
    return made
