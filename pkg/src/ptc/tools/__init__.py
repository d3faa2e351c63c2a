"""Container, I/O, metrics, the full re-encode anchor, experiment harness and CLI."""
