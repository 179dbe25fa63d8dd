"""Audits for endogenous bias in spatial analysis.

Data level: :mod:`endobias.simpson`. Modeling level: :mod:`endobias.gwr`,
:mod:`endobias.kde`. Interpretation level: :mod:`endobias.maup`,
:mod:`endobias.access`. Reports and figures: :mod:`endobias.report`,
:mod:`endobias.svg`.
"""

__version__ = "0.1.0"
