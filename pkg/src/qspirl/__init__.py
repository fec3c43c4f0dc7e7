"""Grid-world navigation with classical, spiking and hybrid quantum Q-learners,
deployed through explicit Q-tables."""

__version__ = "0.1.0"
