"""Module providing tests for root fdistill code."""
