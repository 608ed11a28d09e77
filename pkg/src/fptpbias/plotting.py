"""Figures rendered to files with the Agg backend."""
from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .report import CurveTable, SurfaceTable  # noqa: E402

# fixed metadata keeps the PNG bytes reproducible
_PNG_META = {"Software": None}


def _png(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=110, metadata=_PNG_META)
    plt.close(fig)
    return buf.getvalue()


def curves_png(table: CurveTable) -> bytes:
    strata = np.unique(table.stratum)
    fig, axes = plt.subplots(1, len(strata), figsize=(3.2 * len(strata), 3.2), squeeze=False,
                             sharey=True)
    for ax, lv in zip(axes[0], strata):
        m = table.stratum == lv
        for q in np.unique(table.t_quantile[m]):
            k = m & (table.t_quantile == q)
            ax.plot(table.v[k], table.expected[k], lw=1.2, label=f"t={table.t[k][0]:.3f}")
        ax.plot([0, 1], [0, 1], color="0.7", lw=0.8, ls=":")
        ax.set_title(f"c >= {int(lv)}", fontsize=9)
        ax.set_xlabel("vote share v")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
    axes[0][0].set_ylabel("expected seat share")
    axes[0][-1].legend(fontsize=7, frameon=False)
    fig.tight_layout()
    return _png(fig)


def surfaces_png(table: SurfaceTable) -> bytes:
    panels = [("empirical", table.empirical, "viridis", (0, 1)),
              ("expected", table.expected, "viridis", (0, 1)),
              ("empirical - expected", table.difference, "RdBu_r", None)]
    fig, axes = plt.subplots(1, 3, figsize=(10, 3.2))
    extent = (table.t_edges[0], table.t_edges[-1], table.v_edges[0], table.v_edges[-1])
    for ax, (title, z, cmap, lim) in zip(axes, panels):
        if lim is None:
            r = np.nanmax(np.abs(z)) if np.any(np.isfinite(z)) else 1.0
            lim = (-r, r)
        im = ax.imshow(z, origin="lower", aspect="auto", extent=extent, cmap=cmap,
                       vmin=lim[0], vmax=lim[1])
        ax.set_title(title, fontsize=9)
        ax.set_xlabel("seat threshold t")
        fig.colorbar(im, ax=ax, fraction=0.046)
    axes[0].set_ylabel("vote share v")
    fig.tight_layout()
    return _png(fig)
