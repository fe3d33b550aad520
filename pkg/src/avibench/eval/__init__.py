from .metrics import (BootstrapResult, EvalError, RocCurve, SiteAUC, SubmissionSet, UndefinedAUC, auc,
                      auc_scores, bootstrap_auc, bootstrap_scores, per_site_auc, pooled_vs_mean_r2, roc_points,
                      roc_scores)
from .calibration import (CalibrationTable, calibration_scores, calibration_table, platt_apply, platt_fit,
                          platt_fit_scores, platt_transform)
from .analysis import (ERROR_CATEGORIES, ensemble_mean, interrater_auc, rank_pca, revalidation_candidates,
                       top_mismatched, write_annotation_sheet)
from .io import SubmissionFormatError, load_submission, parse_submission, write_submission
from .report import EvalReport, evaluate
