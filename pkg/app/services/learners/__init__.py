"""
Base learners used as machines.
"""
from app.services.learners.base import Learner
from app.services.learners.bayes import GaussianNaiveBayes
from app.services.learners.linear import LassoRegressor, LogisticRegressionClassifier, RidgeRegressor
from app.services.learners.neighbors import KNeighborsClassifier, KNeighborsRegressor
from app.services.learners.tree import (
    DecisionTreeClassifier,
    DecisionTreeRegressor,
    RandomForestClassifier,
    RandomForestRegressor,
)

__all__ = [
    "Learner",
    "GaussianNaiveBayes",
    "LassoRegressor",
    "LogisticRegressionClassifier",
    "RidgeRegressor",
    "KNeighborsClassifier",
    "KNeighborsRegressor",
    "DecisionTreeClassifier",
    "DecisionTreeRegressor",
    "RandomForestClassifier",
    "RandomForestRegressor",
]
