"""Joint phase and visibility estimation with two-photon N00N and Holland-Burnett probes."""

__version__ = "0.1.0"
