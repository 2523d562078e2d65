"""Classification of partially separable data with exclusive-cluster ensembles."""

from .classify import ClassifierSpec, TrainedClassifier
from .dataset import Dataset, Label, load_csv
from .ensemble import EnsembleModel, FitTrace, Rho, SSIConfig, fit, predict_instance, predict_subject, predict_subjects
from .synth import GroundTruth, SynthConfig, generate

__all__ = [
    "ClassifierSpec",
    "Dataset",
    "EnsembleModel",
    "FitTrace",
    "GroundTruth",
    "Label",
    "Rho",
    "SSIConfig",
    "SynthConfig",
    "TrainedClassifier",
    "fit",
    "generate",
    "load_csv",
    "predict_instance",
    "predict_subject",
    "predict_subjects",
]

__version__ = "0.1.0"
