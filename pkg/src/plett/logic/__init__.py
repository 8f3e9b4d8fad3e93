"""Propositional properties: syntax, parser and robustness semantics."""

from .formula import (And, Comparator, Formula, LinearAtom, Not, Or, atoms,
                      format_formula, replace_or_with_and, signals_of, states_of,
                      to_nnf, with_names)
from .parser import ParseError, parse
from .robustness import (atom_robustness, atom_robustness_interval, normalized_robustness,
                         normalized_robustness_rec, robustness, robustness_interval,
                         wc_normalized_robustness, wc_normalized_robustness_rec)

__all__ = [
    "And", "Comparator", "Formula", "LinearAtom", "Not", "Or", "ParseError",
    "atom_robustness", "atom_robustness_interval", "atoms", "format_formula",
    "normalized_robustness", "normalized_robustness_rec", "parse", "replace_or_with_and",
    "robustness", "robustness_interval", "signals_of", "states_of", "to_nnf",
    "wc_normalized_robustness", "wc_normalized_robustness_rec", "with_names",
]
