"""planforge: an offline query-plan superoptimizer on a simulated engine.

Searches join orders and physical join operators for a single query by
Bayesian optimization in the latent space of a plan-string autoencoder,
with right-censored (timed-out) executions feeding a censored sparse
variational GP surrogate. Every component runs at desk scale against a
deterministic synthetic schema and cost model, so the whole pipeline is
testable end to end without a real DBMS.
"""

__version__ = "0.1.0"
