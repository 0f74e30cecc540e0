"""Command-line harness: data files, baselines, experiments."""
from .data import MultiViewDataset, ViewSpec, load_dataset, toy_generate, write_dataset
from .experiment import ExperimentConfig, cross_validate, emit_plot_data, run_experiment
from .baselines import krr_baseline
