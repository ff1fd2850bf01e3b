"""Adversarial opinion forming on graphs: iterative vs one-round majority
dissemination, with exact oracles for small and block-structured cases."""

from .adversary import (AdversarySpec, exhaustive_strong_search, random_adversary,
                        strong_adversary, weak_adversary)
from .dynamics import (ExpertAssignment, disseminate, disseminate_iterative,
                       disseminate_noniterative, majority_outcome)
from .experiments import ExperimentConfig, estimate_robustness, replicate, run_experiment
from .graph import (PSTAR, CounterexampleParams, Graph, generate_counterexample,
                    graph_from_spec, resolve_sizes, validate_params)

__version__ = "0.1.0"
