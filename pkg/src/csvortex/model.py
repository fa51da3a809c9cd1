"""Coupling parameters shared by the plane and torus solvers."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class ModelParams:
    """Rescaled couplings of the reduced vortex system.

    alpha, beta are the two Chern-Simons couplings after normalizing the
    symmetry-breaking scale; species is the number of non-Abelian flavor pairs
    M; lambda_bg regularizes the singular background profiles; sigma bounds
    beta/alpha in the doubly periodic mode.
    """

    alpha: float
    beta: float
    species: int = 1
    lambda_bg: float = 10.0
    sigma: float = 2.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigError("alpha and beta must be positive")
        if self.species < 1:
            raise ConfigError("species count must be at least 1")
        if not self.lambda_bg > 0:
            raise ConfigError("background regularization lambda must be positive")
        if not self.sigma > 1:
            raise ConfigError("sigma must exceed 1")

    @property
    def decay_mass(self) -> float:
        """Exponential rate constant m = 2*sqrt(2)*min(alpha, beta)."""
        return 2.0 * (2.0 ** 0.5) * min(self.alpha, self.beta)

    def require_torus_mode(self) -> None:
        if self.species != 1:
            raise ConfigError("doubly periodic mode requires a single species")
        if not self.beta > self.alpha:
            raise ConfigError("doubly periodic mode requires beta > alpha")
        if not self.beta / self.alpha < self.sigma:
            raise ConfigError(
                f"beta/alpha = {self.beta / self.alpha:g} must stay below sigma = {self.sigma:g}"
            )
