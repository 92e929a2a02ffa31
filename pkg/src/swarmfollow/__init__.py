"""Leader-follower drone swarm simulator with a color-tracking vision follower."""

__version__ = "0.1.0"
