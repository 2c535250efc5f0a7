"""Shortest-path-biased backpressure routing and simulation."""
