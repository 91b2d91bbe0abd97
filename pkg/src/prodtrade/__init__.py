"""Produce-and-trade coordination economy with reinforcement-learning agents.

A population of specialized producers (choppers, miners, builders) earns coins
by extracting resources, building, and trading through a market maker that
must predict what each seller offers from the seller's binary identity code
alone.  Training both sides with proximal policy updates reproduces three
phenomena: individuation of arbitrary codes, group-level regularities that
suppress minority behavior, and transmission of those regularities across
agent generations.  Run artifacts export the trajectory tables consumed by
the companion browser game.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
