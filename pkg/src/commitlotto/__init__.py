"""Deterministic simulator for zero-collateral N-player commitment lotteries.

The toolkit models two families of tournament lottery protocols over
simulated blockchains: a UTXO backend driven by a pre-signed transaction
scaffold, and a contract backend driven by commit/reveal lottery contracts.
A harness plays honest and adversarial strategies against each other and
measures payoffs, round counts and on-chain/off-chain costs.
"""

__version__ = "0.1.0"
