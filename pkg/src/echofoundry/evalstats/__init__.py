from .knn import knn_predict, knn_probe
from .metrics import (accuracy, bacc, confusion_matrix, f1_macro, f1_per_class,
                      mae, per_class_bacc, r_squared, recall_per_class, roc_auc)
from .projection import project_2d
from .resampling import (TTestResult, bootstrap_std, paired_t_test_one_sided,
                         permutation_test_one_sided, t_sf)

__all__ = [
    "accuracy", "bacc", "per_class_bacc", "recall_per_class", "f1_macro",
    "f1_per_class", "confusion_matrix", "mae", "r_squared", "roc_auc",
    "knn_probe", "knn_predict", "project_2d", "bootstrap_std",
    "permutation_test_one_sided", "paired_t_test_one_sided", "TTestResult", "t_sf",
]
