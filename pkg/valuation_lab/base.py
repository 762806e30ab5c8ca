"""
Base class for matrix-valued valuations on simple functions.

This module provides an abstract base class that defines the common interface
for every valuation the lab can evaluate, test, or extract from.
"""

import json
from abc import ABC, abstractmethod
from typing import Any, Dict, Union

import numpy as np

from .exceptions import DimensionMismatch
from .functions import GridFunction, SimpleFunction
from .geometry import MomentMatrix, _check_dimension


class BlackBoxValuation(ABC):
    """
    Abstract base class for operators V: simple functions on R^n -> n x n matrices.

    Nothing is assumed about V beyond its signature; the residuals and probes of the
    lab decide which properties it has. All valuations share:
    - Instantiation with a dimension, an exponent and parameters
    - Evaluation on simple and grid functions
    - JSON output of the parameters

    Args:
        dim: Ambient dimension n
        exponent_p: Exponent p of the function space
        serial: Whether evaluations must not run concurrently
        **params: Valuation-specific parameters, echoed in JSON output
    """

    def __init__(self, dim: int, exponent_p: float = 1.0, serial: bool = False, **params):
        _check_dimension(dim)
        self.dim = dim
        self.exponent_p = float(exponent_p)
        self.serial = serial
        self.params = params

    @abstractmethod
    def evaluate(self, h: SimpleFunction) -> MomentMatrix:
        """
        Evaluate the valuation.

        Args:
            h: Simple function on R^dim

        Returns:
            n x n matrix V(h)
        """
        pass

    def __call__(self, h: Union[SimpleFunction, GridFunction]) -> MomentMatrix:
        if isinstance(h, GridFunction):
            h = h.to_simple()
        if h.dim != self.dim:
            raise DimensionMismatch(
                f"{self.__class__.__name__} on R^{self.dim} got a function on R^{h.dim}"
            )
        value = np.asarray(self.evaluate(h), dtype=float)
        if value.shape != (self.dim, self.dim):
            raise DimensionMismatch(
                f"valuation returned shape {value.shape}, expected {(self.dim, self.dim)}"
            )
        return value

    def describe(self) -> Dict[str, Any]:
        return {
            "valuation_type": self.__class__.__name__,
            "dim": self.dim,
            "p": self.exponent_p,
            "serial": self.serial,
            "parameters": self.params,
        }

    def to_json(self, indent: int = 2) -> str:
        """
        Export the valuation description to JSON format.

        Args:
            indent: JSON indentation level

        Returns:
            JSON string with valuation type and parameters
        """
        return json.dumps(self.describe(), indent=indent, sort_keys=True)

    def save_json(self, filepath: str) -> None:
        """
        Save the valuation description to a JSON file.

        Args:
            filepath: Path to output JSON file
        """
        with open(filepath, "w", encoding="utf-8") as f:
            f.write(self.to_json())

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(dim={self.dim}, p={self.exponent_p})"
