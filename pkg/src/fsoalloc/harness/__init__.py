"""Experiment configuration, orchestration, benchmarks and oracles."""
