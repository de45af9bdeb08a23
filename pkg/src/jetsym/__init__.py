"""Exact symbolic integrability analysis of scalar evolution equations u_t = F[u]."""

__version__ = "0.1.0"
