"""shredkit: DadaGP guitar tablature tokens, guitarist-style analysis and
artist-conditioned generation/classification at desk scale."""

__version__ = "0.1.0"
