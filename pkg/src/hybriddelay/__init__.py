"""Hybrid delay model toolkit for NOR/NAND and Muller C gates."""

from .delay_core import CGateParams, GateParams, ModeKind, ModeSwitch

__all__ = ["CGateParams", "GateParams", "ModeKind", "ModeSwitch"]
__version__ = "0.1.0"
