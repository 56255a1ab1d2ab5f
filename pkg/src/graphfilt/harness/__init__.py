"""Experiment harness: configuration, datasets, training, CLI."""
from .config import ArchitectureConfig, ExperimentConfig, TrainingConfig
from .data import (Dataset, build_dataset, build_similarity_graph,
                   dataset_hash, export_dataset, gen_source_localization,
                   ingest_edge_list, pearson_similarity)
from .train import (MetricsRecord, build_model, evaluate, metrics_to_csv,
                    run_experiment, train)

__all__ = [
    "ArchitectureConfig", "Dataset", "ExperimentConfig", "MetricsRecord",
    "TrainingConfig", "build_dataset", "build_model",
    "build_similarity_graph", "dataset_hash", "evaluate", "export_dataset",
    "gen_source_localization", "ingest_edge_list", "metrics_to_csv",
    "pearson_similarity", "run_experiment", "train",
]
