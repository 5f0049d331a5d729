"""Offline fixture generator: shapes dataset, trained toy CNN, latency tables."""
