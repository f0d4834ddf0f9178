"""
Command-line runner for the skeleton and random walk experiments
"""
