"""
Utility probe: a classifier trained on synthetic records, scored on held-out real records.
"""

import logging

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import accuracy_score

from topagg.pate.data import Dataset

logger = logging.getLogger(__name__)


def probe_accuracy(synthetic: Dataset, holdout: Dataset, C: float = 1.0) -> float:
    """
    Accuracy on ``holdout`` of a regularized logistic regression fitted to ``synthetic``.

    When the synthetic records carry a single class the probe predicts that class.
    """
    if np.unique(synthetic.y).size < 2:
        logger.debug("probe trained on a single class")
        return float(accuracy_score(holdout.y, np.full(len(holdout), synthetic.y[0])))
    if not np.all(np.isfinite(synthetic.x)):
        return float("nan")
    model = LogisticRegression(C=C, max_iter=1000, solver="lbfgs")
    model.fit(synthetic.x, synthetic.y)
    return float(accuracy_score(holdout.y, model.predict(holdout.x)))
