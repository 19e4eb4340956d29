"""Channel models, solvers, metrics and serialization."""
