"""Deterministic desk-scale simulator of the Estonian internet-voting pipeline.

Seven protocol components as message-passing state machines, pluggable
cryptography, five append-only audit logs with a consistency checker,
revote/precedence semantics, and the full seat-allocation mathematics for
Riigikogu, European Parliament, and municipal elections.
"""

__version__ = "0.1.0"
