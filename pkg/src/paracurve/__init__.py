"""paracurve: parabolic curves of tangent-to-identity diffeomorphisms
along formal invariant curves.

Layers (bottom to top):

  jets        exact / floating truncated power-series arithmetic
  liealg      time-one maps of formal fields and their generators
  curves      formal curve parametrizations and invariance tests
  blowups     permissible blow-up / ramification calculus with certificates
  turrittin   reduction of linear meromorphic systems to principal form
  normal_form full reduction pipeline for fields and diffeomorphisms
  sectors     attracting directions, saddle domains, placement verdicts
  petals      numerical construction and verification of parabolic curves
  cli         document parsing, commands, reports
"""

__version__ = "0.1.0"

from . import jets  # noqa: F401  (re-exported for convenience)
