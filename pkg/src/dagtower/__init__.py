"""Uniform random DAGs, their tower decomposition, and Markov equivalence classes."""

__version__ = "0.1.0"

from .dag import (  # noqa: E402
    Dag,
    DagError,
    ReachPoset,
    VStructure,
    count_dags,
    enumerate_dags,
    is_acyclic,
    non_collider_edges,
    poset_weight,
    reachability_poset,
    skeleton,
    v_structures,
)
from .tower import (  # noqa: E402
    Tower,
    build_layer_dp,
    regeneration_points,
    sample_dag_given_vector,
    sample_tower_vector,
    sample_uniform_dag,
    tower_dag_count,
    tower_decompose,
    tower_vector_weight,
)
from .mec import (  # noqa: E402
    CapExceeded,
    EssentialGraph,
    chain_components,
    component_extension_count,
    cpdag,
    is_essential,
    last_noncollider_layer,
    mec_brute_force,
    mec_size,
)
