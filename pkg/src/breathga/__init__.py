"""Respiration-pattern classification with a from-scratch 1D-CNN whose head
architecture is chosen by a genetic algorithm over a frozen pre-trained base."""

__version__ = "0.1.0"
