"""agentrep: evidence-grounded, context-conditioned reputation for
autonomous agents, with a tamper-evident commitment ledger and a
deterministic adversarial marketplace simulator."""

__version__ = "0.1.0"
