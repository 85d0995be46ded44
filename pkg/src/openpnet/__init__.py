"""openpnet: open pNets, their symbolic semantics and bisimulation checking."""

from .bisim import CheckReport, RelationTriple, align, check_strong, check_weak, parse_relation
from .dsl import load, load_text
from .semantics import OpenAutomaton, OpenTransition, derive_open_automaton
from .weak import WeakOpenAutomaton, WeakOpenTransition, saturate

__version__ = "0.1.0"

__all__ = [
    "CheckReport", "OpenAutomaton", "OpenTransition", "RelationTriple", "WeakOpenAutomaton",
    "WeakOpenTransition", "align", "check_strong", "check_weak", "derive_open_automaton", "load",
    "load_text", "parse_relation", "saturate",
]
