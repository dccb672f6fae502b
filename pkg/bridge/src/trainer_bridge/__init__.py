"""trainer_bridge: warm-up preference training and dynamics export.

The bridge is the only component that tokenizes. Everything it writes
(dynamics.jsonl, pairlogprobs.jsonl) carries precomputed log-probs and token
counts, so the consuming pipeline stays tokenizer-agnostic.
"""

__version__ = "0.1.0"
