"""Cover-matrix design for label-powerset multi-label ensembles."""
from .cover_core import CoverMatrix, LabelSet, cover_stats, parse_matrix, serialize_matrix
from .dataset_io import MultiLabelDataset, load_dataset, parse_mulan, parse_native, serialize_native
from .errors import BudgetError, MlcoverError, ValidationError
from .harness import ExperimentConfig, cross_validate, rank_strategies
from .lp_ensemble import predict, train_ensemble
from .scp import StrategyConfig, design

__version__ = "0.1.0"
