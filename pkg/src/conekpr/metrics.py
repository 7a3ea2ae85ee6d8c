"""Keypoint evaluation metrics and the comparison-table report.

Definitions used throughout (all distances in pixels of the model input):
  mse      mean squared per-coordinate error
  rmse     sqrt(mse)
  norm_me  mean Euclidean keypoint distance divided by the image width
  std_dev  standard deviation (population) of Euclidean keypoint distances
  mape     mean absolute percentage error over coordinates, skipping pairs
           whose ground-truth coordinate is zero
  map_at_3px  mean over keypoint indices of average precision where a
           prediction is correct iff its distance to ground truth <= 3 px,
           ranked per index by predicted confidence (stable order on ties)
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

CORRECT_DISTANCE_PX = 3.0


@dataclass
class MetricReport:
    mse: float
    rmse: float
    norm_me: float
    std_dev: float
    mape: float
    avg_confidence: float
    map_at_3px: float
    n_samples: int

    def to_kv(self) -> str:
        """Machine-readable key=value lines."""
        return "".join(f"{k}={v}\n" for k, v in asdict(self).items())

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def evaluate(pred_keypoints, confidences, true_keypoints, image_width: int = 80,
             threshold_px: float = CORRECT_DISTANCE_PX) -> MetricReport:
    """Score predicted keypoints against ground truth.

    pred_keypoints/true_keypoints: (N, K, 2); confidences: (N, K).
    """
    pk = np.asarray(pred_keypoints, dtype=np.float64)
    tk = np.asarray(true_keypoints, dtype=np.float64)
    conf = np.asarray(confidences, dtype=np.float64)
    if pk.size == 0 or tk.size == 0:
        raise ValueError("evaluate requires at least one prediction/ground-truth pair")
    if pk.shape != tk.shape:
        raise ValueError(f"prediction shape {pk.shape} != ground truth shape {tk.shape}")
    if conf.shape != pk.shape[:2]:
        raise ValueError(f"confidence shape {conf.shape} != {pk.shape[:2]}")

    coord_err = pk - tk
    mse = float(np.mean(coord_err ** 2))
    rmse = float(np.sqrt(mse))
    dists = np.linalg.norm(coord_err, axis=2)  # (N, K)
    norm_me = float(dists.mean() / image_width)
    std_dev = float(dists.std())

    nonzero = tk != 0
    if nonzero.any():
        mape = float(np.mean(np.abs(coord_err[nonzero] / tk[nonzero])) * 100.0)
    else:
        mape = 0.0

    avg_confidence = float(conf.mean())
    ap_per_index = [
        average_precision(dists[:, k], conf[:, k], threshold_px)
        for k in range(pk.shape[1])
    ]
    return MetricReport(
        mse=mse,
        rmse=rmse,
        norm_me=norm_me,
        std_dev=std_dev,
        mape=mape,
        avg_confidence=avg_confidence,
        map_at_3px=float(np.mean(ap_per_index)),
        n_samples=pk.shape[0],
    )


def average_precision(distances, confidences, threshold_px: float = CORRECT_DISTANCE_PX) -> float:
    """AP over a confidence-ranked list; every ground truth counts as a positive."""
    d = np.asarray(distances, dtype=np.float64)
    c = np.asarray(confidences, dtype=np.float64)
    order = np.argsort(-c, kind="stable")
    correct = d[order] <= threshold_px
    if not correct.any():
        return 0.0
    cum_tp = np.cumsum(correct)
    ranks = np.arange(1, d.size + 1)
    precision_at_tp = cum_tp[correct] / ranks[correct]
    return float(precision_at_tp.sum() / d.size)


TABLE_COLUMNS = ("Model", "MSE", "Root MSE", "Norm ME", "Std Dev", "mAP")


def render_table(rows) -> str:
    """Render (model name, MetricReport) rows as the comparison table."""
    lines = [list(TABLE_COLUMNS)]
    for name, rep in rows:
        lines.append([
            name,
            f"{rep.mse:.4f}",
            f"{rep.rmse:.4f}",
            f"{rep.norm_me:.4f}",
            f"{rep.std_dev:.4f}",
            f"{rep.map_at_3px:.2f}",
        ])
    widths = [max(len(r[i]) for r in lines) for i in range(len(TABLE_COLUMNS))]
    sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
    out = [sep]
    for i, row in enumerate(lines):
        cells = " | ".join(cell.ljust(w) for cell, w in zip(row, widths))
        out.append(f"| {cells} |")
        if i == 0:
            out.append(sep)
    out.append(sep)
    return "\n".join(out) + "\n"
