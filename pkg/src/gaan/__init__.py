"""Graph attribute aggregation networks: attribute-grouped convolution and
progressive margin folding for molecular property prediction."""

from .datasets import Dataset, load_dataset
from .estimator import GAANClassifier, GAANRegressor, MarginFoldingFeaturizer, SmilesToGraph
from .folding import (FoldParams, FoldingPyramid, HyperVertex, RingCollapseParams, build_pyramid,
                      collapse_ring, expand_provenance, fold_step, should_collapse_ring)
from .gac import GacParams, classify_elements, gac_forward
from .graph import (AttributedGraph, AttributeSchema, EdgeAttr, VertexAttr, build_graph, degree,
                    incident_edges, initial_features)
from .margin import MarginalStructure, RingSystem, find_cycle_basis, get_marginal_structure
from .model import GAANModel, ModelConfig, forward_model, parse_arch
from .smiles import parse_smiles, to_smiles
from .training import evaluate, train

__version__ = "0.1.0"
