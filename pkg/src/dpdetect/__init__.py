"""Dark-pattern detection in UI text with bag-of-words features and logistic regression."""

from .corpus import Corpus, Document, SplitSpec, load_corpus, preprocess, split
from .experiments import (
    ParamGrid,
    feature_importance,
    fit_pipeline,
    grid_search,
    k_fold_cv,
    misclassification_report,
    sensitivity_analysis,
)
from .metrics import auc, confusion_matrix, roc_curve, scores
from .model import TrainConfig, TrainedModel, load_model, predict, predict_proba, save_model, sigmoid, train
from .vectorizer import VectorizerConfig, Vocabulary, fit_vocabulary, tokenize, transform

__version__ = "0.1.0"
