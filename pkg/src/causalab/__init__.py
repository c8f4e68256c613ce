"""Random causal maps built from critical Galton-Watson trees, and their geometry.

Submodules: ``offspring`` (laws), ``trees`` (samplers), ``maps`` (graph
constructions), ``blocks`` (quarter-plane blocks), ``metric`` (girth and
balls), ``resistance``, ``walk`` (heat kernels and walkers) and
``experiments`` (config-driven runs behind the ``clab`` command).
"""
from .errors import *  # noqa: F401,F403
from .offspring import OffspringLaw, law_from_spec, make_custom, make_geometric_critical, make_poisson, make_stable, size_biased
from .trees import PlaneTree, decode, encode, generation_sizes, sample_gw, sample_kesten, spine_forest
from .maps import CausalMap, build_carpet, build_causal, build_causal_forest, build_cautrig, build_tree_graph, build_variant
from .blocks import Block, dual_width, estimate_medians, extract_block, left_right_distance, width
from .metric import ball_volume, distance, girth_at_height
from .resistance import effective_resistance, flow_energy_upper, nash_williams_lower, resistance_growth
from .walk import estimate_ds, estimate_nu, exact_kernel, mc_walk, vc_check
from .fitting import fit_loglog
from .experiments import ExperimentConfig, ResultRecord, run, seed_stream

__version__ = "0.1.0"
