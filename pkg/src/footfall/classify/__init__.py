"""SVM and MLP classifiers, dataset handling and evaluation metrics."""

from .ann import AnnConfig, AnnModel, ann_predict, train_ann
from .data import (
    Dataset,
    Scaler,
    fit_scaler,
    kfold_cv,
    standardize,
    stratified_folds,
    train_test_split,
    undersample,
)
from .io import load_model, model_from_dict, model_to_dict, save_model
from .metrics import Metrics, evaluate
from .svm import KernelSpec, SvmModel, kernel_matrix, kkt_residuals, svm_predict, train_svm

__all__ = [
    "AnnConfig",
    "AnnModel",
    "Dataset",
    "KernelSpec",
    "Metrics",
    "Scaler",
    "SvmModel",
    "ann_predict",
    "evaluate",
    "fit_scaler",
    "kernel_matrix",
    "kfold_cv",
    "kkt_residuals",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "save_model",
    "standardize",
    "stratified_folds",
    "svm_predict",
    "train_ann",
    "train_svm",
    "train_test_split",
    "undersample",
]
