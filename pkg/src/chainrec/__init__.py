"""Recurrence analysis for piecewise-linear dynamics on metric graphs."""

from .dynamics import EXAMPLE_IDS, MapPiece, PerturbationSpec, SystemSpec, \
    apply_perturbation, c0_distance, expected_region, make_example, \
    random_perturbation, scripted_perturbation
from .errors import ChainrecError, ConfigError, DegenerateCover, \
    InternalInvariantError, InvalidDiscretization, InvalidPerturbation, \
    InvalidPoint, InvalidSpace, MismatchedComplexes, NotApplicable, \
    PerturbationDegenerate
from .explosion import BallChain, ExplosionReport, closing_perturbation, \
    find_ball_chain, near_fixed_cells, probe_explosion, probe_full_explosion
from .lyapunov import LyapunovFunction, complete_lyapunov, neutral_set, \
    strict_exists
from .morse import ConnectionDigraph, OpenCover, connection_digraph, \
    decompose, has_cycles, open_decomposition
from .recurrence import BarrierMatrix, GRResult, RecurrenceOptions, barrier, \
    chain_recurrent, generalized_recurrent, mather_classes, nonwandering, \
    strong_chain_recurrent
from .space import Edge, MetricComplex, Point, build_circle, \
    build_metric_graph, cell_set_distances, complex_from_spec, \
    hausdorff_cells, load_complex
from .transition import TransitionGraph, build_transition_graph, \
    epsilon_subgraph, zero_subgraph

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
