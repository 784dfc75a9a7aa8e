"""End-to-end fitting, prediction and the command-line interface."""
