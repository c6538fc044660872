"""Module providing tests for the experiment presets and command line."""
