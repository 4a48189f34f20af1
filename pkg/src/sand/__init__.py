"""Neighbor discovery under Byzantine faults: deception geometry, the SAND protocol and a simulator."""

from .geometry import EPS_R, LayoutSpec, Node, Point, RadioParams, Role

__all__ = ["EPS_R", "LayoutSpec", "Node", "Point", "RadioParams", "Role"]
