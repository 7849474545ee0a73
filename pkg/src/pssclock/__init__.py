"""pssclock: clocks of positive self-similar Markov processes."""

__version__ = "0.1.0"
