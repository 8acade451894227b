"""Timeliness algebra of outcome expressions over improper random variables."""

from .analysis import (QTA, Verdict, check_qta, compare_designs, failure_analysis,
                       failure_rate)
from .expr import (BOT, TOP, AllToFinish, AnyToFinish, Base, Bottom, OutcomeExpr,
                   ParseError, ProbChoice, Seq, Top, parse, pretty, substitute)
from .numeric import (DeltaQ, Grid, GridMismatch, all_to_finish, any_to_finish,
                      cdf_distance, convolve, failure, intangible_mass, leq, mixture,
                      perfection, properise_irv)
from .oracle import SampleReport, sample, sample_once
from .rewrite import (NotExtractable, RewriteRule, RewriteTrace, RuleMismatch, apply_at,
                      extract_failure, normalize, properise, rule_catalog)
from .semantics import BasicAssignment, DistributionSpec, evaluate, realize

__all__ = [
    "QTA", "Verdict", "check_qta", "compare_designs", "failure_analysis", "failure_rate",
    "BOT", "TOP", "AllToFinish", "AnyToFinish", "Base", "Bottom", "OutcomeExpr",
    "ParseError", "ProbChoice", "Seq", "Top", "parse", "pretty", "substitute",
    "DeltaQ", "Grid", "GridMismatch", "all_to_finish", "any_to_finish", "cdf_distance",
    "convolve", "failure", "intangible_mass", "leq", "mixture", "perfection",
    "properise_irv", "SampleReport", "sample", "sample_once", "NotExtractable",
    "RewriteRule", "RewriteTrace", "RuleMismatch", "apply_at", "extract_failure",
    "normalize", "properise", "rule_catalog", "BasicAssignment", "DistributionSpec",
    "evaluate", "realize",
]

__version__ = "0.1.0"
