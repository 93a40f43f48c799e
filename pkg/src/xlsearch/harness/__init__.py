"""Entity orchestration, plaintext reference oracle, corpus generation and benchmarks."""
