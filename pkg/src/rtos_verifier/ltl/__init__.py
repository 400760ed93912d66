from .buchi import BuchiAutomaton, to_buchi
from .formula import Formula, check_ltl_on_lasso, format_formula, parse_ltl
from .repository import PropertyRepository, get_property_repository
from .search import Lasso, find_accepting_cycle, nested_dfs, verify_ltl

__all__ = [
    "BuchiAutomaton",
    "Formula",
    "Lasso",
    "PropertyRepository",
    "check_ltl_on_lasso",
    "find_accepting_cycle",
    "format_formula",
    "get_property_repository",
    "nested_dfs",
    "parse_ltl",
    "to_buchi",
    "verify_ltl",
]
