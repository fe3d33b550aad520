from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from ..manifest import DatasetManifest
from ..svg import calibration_figure, roc_figure
from .calibration import CalibrationTable, calibration_scores
from .metrics import BootstrapResult, RocCurve, SiteAUC, SubmissionSet, align, auc_scores, \
    bootstrap_scores, per_site_auc, roc_scores


@dataclass
class EvalReport:
    auc: float
    bootstrap: BootstrapResult
    roc: RocCurve
    calibration: CalibrationTable
    sites: SiteAUC | None
    n_items: int
    n_positive: int

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "ci": self.bootstrap.to_dict(),
            "n_items": self.n_items,
            "n_positive": self.n_positive,
            "per_site": self.sites.to_dict() if self.sites else None,
            "roc": [{"fpr": f, "tpr": t, "threshold": (None if th == float("inf") else th)}
                    for f, t, th in self.roc.points],
            "calibration": self.calibration.to_rows(),
        }


def evaluate(sub: SubmissionSet, truth: DatasetManifest, n_boot: int = 1000, seed: int = 0,
             n_bins: int = 10) -> EvalReport:
    _, s, y = align(sub, truth)
    sites = None
    if all(it.site for it in truth.items if it.label is not None):
        sites = per_site_auc(sub, truth)
    return EvalReport(auc_scores(s, y), bootstrap_scores(s, y, n_boot, seed), roc_scores(s, y),
                      calibration_scores(s, y, n_bins), sites, int(y.size), int(y.sum()))


def write_report_files(report: EvalReport, out_dir, label: str = "submission") -> dict[str, Path]:
    """ROC and calibration tables as CSV plus SVG figures next to them."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"roc_csv": out / "roc.csv", "calibration_csv": out / "calibration.csv",
             "roc_svg": out / "roc.svg", "calibration_svg": out / "calibration.svg"}
    with open(paths["roc_csv"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["fpr", "tpr", "threshold"])
        w.writerows(report.roc.points)
    with open(paths["calibration_csv"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["lo", "hi", "count", "mean_predicted", "empirical_rate"])
        for b in report.calibration.bins:
            w.writerow([b.lo, b.hi, b.count, "" if b.mean_predicted is None else b.mean_predicted,
                        "" if b.empirical_rate is None else b.empirical_rate])
    roc_figure([(label, report.roc)]).save(paths["roc_svg"])
    calibration_figure([(label, report.calibration)]).save(paths["calibration_svg"])
    return paths


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
