"""Module providing tests for distillation training."""
