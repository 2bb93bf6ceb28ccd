"""Experiment configuration, grid orchestration, property suites and report emission."""
