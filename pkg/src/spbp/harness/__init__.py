"""Experiment orchestration: configs, instance corpora, sweeps and the CLI."""
