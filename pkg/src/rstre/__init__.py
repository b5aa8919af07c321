"""Random spanning trees of the complete graph in a random environment.

Edge ``e`` of K_n carries an i.i.d. uniform weight ``omega_e`` and conductance
``exp(-beta * omega_e)``; the tree measure is proportional to the product of
conductances.  The package provides environments, electrical quantities,
exact samplers and enumeration, observables, local-limit tools and the
``rstre-lab`` experiment runner.
"""

import sys

from .electrical import (
    ConditioningError,
    InfeasibleError,
    WeightedNetwork,
    build_network,
    contract,
    edge_in_tree_probs,
    edges_in_tree_prob,
    effective_resistance,
    flow_energy,
    nash_williams_lower_bound,
    pairwise_resistances,
    transfer_impedance,
    transfer_impedance_matrix,
    unit_current_flow,
)
from .env import (
    Environment,
    LowWeightEnvironment,
    component_stats,
    connectivity_curve,
    derive_seed,
    edge_endpoints,
    edge_index,
    layered_graph,
    sample_environment,
    sample_low_weight_environment,
    snapshot_graph,
)
from .locallimit import (
    ball,
    ball_agreement_rate,
    canonical_code,
    count_tree_maps,
    empirical_ball_distribution,
    mean_tree_moment,
    poisson_survive_law_r1,
    sample_poisson_survive,
    tv_distance,
)
from .observables import (
    ZETA3,
    expected_length_exact,
    length_mc,
    length_theory_low,
    mst_length,
    mu,
    overlap_exact,
    overlap_mc,
    overlap_theory_low,
)
from .spanning import (
    SpanningTree,
    TreeSampler,
    enumerate_spanning_trees,
    kruskal_mst,
    mst_max_degree,
    wilson_sample,
)

__version__ = "0.1.0"

__all__ = sorted(
    name for name, value in globals().items()
    if not name.startswith("_") and not isinstance(value, type(sys))
)
