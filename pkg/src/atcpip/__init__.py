"""Agent-to-agent IP licensing protocol.

Programmable license terms, a negotiation state machine, a simulated
hash-chained ledger with agreement and draft tokens, royalty-aware
payment routing, dispute arbitration, reputation records, and a
deterministic multi-agent simulator tying it all together.
"""

__version__ = "0.1.0"
