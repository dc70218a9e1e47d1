"""CLI harness: experiment registry, data generation, reports, figures."""
