"""A two-level-logic proof assistant kernel: an executable interpreter for a
hereditary-Harrop specification logic plus a reasoning kernel with inductive
definitions, equality, nominal constants and the generic quantifier."""

__version__ = "0.1.0"
