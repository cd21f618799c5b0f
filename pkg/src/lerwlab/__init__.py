"""Loop-erased walks, spanning trees and their Monte Carlo checks on the torus."""

__version__ = "0.1.0"
