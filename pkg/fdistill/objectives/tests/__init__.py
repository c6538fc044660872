"""Module providing tests for the distillation objectives."""
