"""Experiment harness: synthetic studies, audio pipeline and CLI."""
