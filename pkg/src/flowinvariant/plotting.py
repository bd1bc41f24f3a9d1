"""Matplotlib report figures written next to the numeric outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVE = dict(dpi=100, metadata={"Software": None})


def _finish(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def plot_lookup(path, lookup_rgb: np.ndarray, foe: tuple[float, float], corner: tuple[float, float] | None = None):
    """Color-coded lookup image with the FOE (and a measured quadrant corner) marked."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.imshow(lookup_rgb, interpolation="nearest")
    ax.plot(*foe, "w+", markersize=12, label="FOE")
    if corner is not None and np.all(np.isfinite(corner)):
        ax.plot(*corner, "yx", markersize=9, label="quadrant corner")
    ax.set_title("lookup ratio (red > 0, blue < 0)")
    ax.legend(loc="lower right", fontsize=7)
    ax.set_axis_off()
    _finish(fig, path)


def plot_frame_panel(path, frame: np.ndarray, invariant_rgb: np.ndarray, mask: np.ndarray,
                     gt_mask: np.ndarray | None = None, title: str = ""):
    ncols = 3 if gt_mask is None else 4
    fig, axes = plt.subplots(1, ncols, figsize=(3.2 * ncols, 2.8))
    axes[0].imshow(frame, cmap="gray", vmin=0, vmax=1, interpolation="nearest")
    axes[0].set_title("frame")
    axes[1].imshow(invariant_rgb, interpolation="nearest")
    axes[1].set_title("invariant")
    axes[2].imshow(mask, cmap="gray", vmin=0, vmax=1, interpolation="nearest")
    axes[2].set_title("detected")
    if gt_mask is not None:
        # green = hit, red = false alarm, blue = miss
        overlay = np.zeros(mask.shape + (3,))
        overlay[mask & gt_mask] = (0, 1, 0)
        overlay[mask & ~gt_mask] = (1, 0, 0)
        overlay[~mask & gt_mask] = (0, 0, 1)
        axes[3].imshow(overlay, interpolation="nearest")
        axes[3].set_title("vs ground truth")
    for ax in axes:
        ax.set_axis_off()
    if title:
        fig.suptitle(title, fontsize=9)
    _finish(fig, path)


def plot_metrics(path, report) -> None:
    frames = np.arange(report.frames_evaluated)
    fig, ax = plt.subplots(figsize=(6, 3.2))
    for name in ("precision", "recall", "f1", "iou"):
        ax.plot(frames, [getattr(m, name) for m in report.per_frame], marker=".", label=name)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("frame")
    ax.set_ylabel("score")
    ax.set_title(f"mean F1 {report.mean_f1:.3f}, mean IoU {report.mean_iou:.3f}")
    ax.legend(fontsize=7, ncol=4, loc="lower left")
    ax.grid(alpha=0.3)
    _finish(fig, path)


def plot_foe_track(path, estimated: list[tuple[float, float]], reference: tuple[float, float] | None):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    est = np.asarray(estimated, dtype=float).reshape(-1, 2)
    ax.plot(est[:, 0], label="x estimate")
    ax.plot(est[:, 1], label="y estimate")
    if reference is not None:
        ax.axhline(reference[0], color="C0", ls="--", lw=0.8, label="x reference")
        ax.axhline(reference[1], color="C1", ls="--", lw=0.8, label="y reference")
    ax.set_xlabel("frame")
    ax.set_ylabel("px")
    ax.set_title("FOE per frame")
    ax.legend(fontsize=7)
    _finish(fig, path)
