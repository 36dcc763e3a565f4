"""Figure rendering: trace series plus the theoretical envelope.

Data points are the CSV values, plotted without resampling; the dashed
envelope is drawn only over the late window the checkers use, so the
asymptotic bounds are not suggested to hold from t = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from . import constants as cst  # noqa: E402
from .traceio import SchemaError, read_summary, read_trace  # noqa: E402

KINDS = ("total_curvature_unnormalized", "total_curvature_normalized",
         "blowup", "nonexponential", "lengths")

# which verify-summary entry feeds each figure's envelope constant
SUMMARY_KEYS = {
    "total_curvature_unnormalized": "total_curvature_unnormalized",
    "total_curvature_normalized": "total_curvature_normalized",
    "blowup": "blowup",
    "nonexponential": "nonexponential",
    "lengths": "boundary_length_floor",
}


@dataclass(frozen=True)
class PlotJob:
    csv_path: str
    kind: str
    out_path: str
    annotate: bool = True
    constants_path: str | None = None   # verify summary TSV; None = refit

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


@dataclass(frozen=True)
class RenderResult:
    out_path: str
    constant: float
    constant_source: str
    window: tuple[float, float] | None = None


def _constant(job: PlotJob, cols):
    """Envelope constant from the summary file if given, else refit with
    the same window conventions."""
    refit = {
        "total_curvature_unnormalized": cst.unnormalized_constant,
        "total_curvature_normalized": cst.normalized_constant,
        "blowup": cst.blowup_constant,
        "nonexponential": cst.nonexponential_offset,
    }
    if job.kind == "lengths":
        value, late = cst.boundary_length_floor(cols), None
    else:
        value, late = refit[job.kind](cols)
    if job.constants_path is not None:
        summary = read_summary(job.constants_path)
        key = SUMMARY_KEYS[job.kind]
        if key not in summary:
            raise SchemaError(f"summary file has no entry {key!r}")
        value = summary[key]["constant"]
        source = f"summary:{key}"
    else:
        source = "refit"
    return value, late, source


def render(job: PlotJob) -> RenderResult:
    """Render one figure kind to ``job.out_path``; returns the envelope
    constant that was drawn."""
    cols = read_trace(job.csv_path)
    value, late, source = _constant(job, cols)

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    window = None

    if job.kind == "total_curvature_unnormalized":
        t = cols["t_tilde"]
        pos = (t > 0) & (cols["total_R"] > 0)
        ax.loglog(t[pos], cols["total_R"][pos], ".", ms=3, label="total curvature")
        tw = t[late]
        ax.loglog(tw, value / tw, "k--", lw=1.2, label=f"{value:.3g} / t")
        ax.set_xlabel("unnormalised time")
        ax.set_ylabel("total curvature")
        window = (float(tw[0]), float(tw[-1]))
    elif job.kind == "total_curvature_normalized":
        t = cols["t_norm"]
        pos = (t > 0) & (cols["r_norm"] > 0)
        ax.loglog(1.0 + t[pos], cols["r_norm"][pos], ".", ms=3,
                  label="average curvature r(t)")
        tw = t[late]
        ax.loglog(1.0 + tw, value / np.log1p(tw), "k--", lw=1.2,
                  label=f"{value:.3g} / log(1+t)")
        ax.set_xlabel("1 + normalised time")
        ax.set_ylabel("r(t)")
        window = (float(tw[0]), float(tw[-1]))
    elif job.kind == "blowup":
        t = cols["t_tilde"]
        pos = (t > 0) & (cols["R_max"] > 0)
        ax.loglog(t[pos], cols["R_max"][pos], ".", ms=3, label="max curvature")
        tw = t[late]
        ax.loglog(tw, value * tw, "k--", lw=1.2, label=f"{value:.3g} t")
        ax.set_xlabel("unnormalised time")
        ax.set_ylabel("R_max")
        window = (float(tw[0]), float(tw[-1]))
    elif job.kind == "nonexponential":
        t = cols["t_norm"]
        pos = (t > 0) & (cols["R_max_norm"] > 0)
        ax.loglog(t[pos], cols["R_max_norm"][pos], ".", ms=3,
                  label="normalised R_max")
        tw = t[late]
        ax.loglog(tw, 2.0 / (tw + value), "k--", lw=1.2,
                  label=f"2 / (t + {value:.3g})")
        ax.set_xlabel("normalised time")
        ax.set_ylabel("R_max(t)")
        window = (float(tw[0]), float(tw[-1]))
    else:   # lengths
        t = cols["t_norm"]
        ax.semilogx(1.0 + t, cols["len_minus_norm"], ".", ms=3, label="boundary -")
        ax.semilogx(1.0 + t, cols["len_plus_norm"], ".", ms=3, label="boundary +")
        ax.semilogx(1.0 + t, cols["len_mid_norm"], ".", ms=3, label="middle parallel")
        ax.axhline(value, color="k", ls="--", lw=1.2, label=f"floor {value:.4g}")
        ax.set_xlabel("1 + normalised time")
        ax.set_ylabel("normalised lengths")

    ax.set_title(job.kind.replace("_", " "))
    ax.legend(loc="best", fontsize=8)
    if job.annotate:
        ax.text(0.02, 0.03, f"envelope constant = {value:.12g}\n({source})",
                transform=ax.transAxes, fontsize=7,
                bbox=dict(boxstyle="round", fc="white", alpha=0.75))
    fig.tight_layout()
    fig.savefig(job.out_path, dpi=130)
    plt.close(fig)
    return RenderResult(out_path=job.out_path, constant=float(value),
                        constant_source=source, window=window)
