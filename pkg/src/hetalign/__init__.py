"""Local alignment of node-colored networks and Markov clustering of the alignment graph."""

from .alignment import (CLASSES, DEFAULT_WEIGHTS, AlignmentBuilder, AlignmentGraph, EdgeClass, Flavor,
                        Kind, SeedPair, WeightSchema, build_alignment_graph, classify_pair, edge_weight,
                        identity_seeds, parse_seed_pairs)
from .distance import BEYOND, DistanceCache, bounded_distance
from .graph_core import ColoredGraph, GraphSpec, generate_er_colored, parse_colored_graph, write_colored_graph
from .mcl import ClusterSet, MclParams, mcl_cluster

__version__ = "0.1.0"
