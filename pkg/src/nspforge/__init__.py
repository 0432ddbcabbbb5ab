"""Nurse scheduling toolkit: pattern mining, shift prediction, WCSP solving and constraint learning."""

__version__ = "0.1.0"

from .bayes import BernoulliScheduleGenerator, NbModel, ShiftNaiveBayes, bn_simulate, nb_evaluate, nb_predict, nb_train
from .evaluation import QualityReport, compare_generated, frobenius_distance
from .exceptions import (
    CapacityError,
    ConsistencyError,
    IncompleteAssignmentError,
    LearningError,
    NspError,
    ParseError,
    ShapeError,
    TrainingError,
)
from .learner import (
    CSPLearner,
    LearnedConstraints,
    NmfFactors,
    ScheduleNMF,
    constraints_to_wcsp,
    learn_csp,
    learning_benchmark,
    nmf_factorize,
    nmf_predict,
)
from .mining import AprioriMiner, TwoPhaseMiner, apriori, generate_rules, simulate_schedule, two_phase
from .model import Assignment, NspInstance, Schedule, ShiftPattern, WcspInstance, assigned, pattern_cost, solution_cost
from .solver import (
    ConstraintVerdict,
    SearchStats,
    SolveResult,
    branch_and_bound,
    check_global,
    check_unary,
    compute_lb,
    dfs_first_feasible,
    gac_filter,
    node_consistency,
    sls_solve,
)

__all__ = [name for name in dir() if not name.startswith("_")]
