"""IMRL: multi-dimensional representation learning and behavior cloning
for a synthetic 2D food-scooping environment."""

__version__ = "0.1.0"
