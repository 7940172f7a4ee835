"""Adam optimizer over named parameter arrays."""

import numpy as np

from thermocline_twin.models.neural import TrainConfig


class AdamOptimizer:
    """Bias-corrected Adam; keeps first and second moments per parameter name."""

    def __init__(self, cfg: TrainConfig) -> None:
        self.learning_rate = cfg.learning_rate
        self.beta1 = cfg.beta1
        self.beta2 = cfg.beta2
        self.eps = cfg.eps
        self.step_count = 0
        self._first: dict[str, np.ndarray] = {}
        self._second: dict[str, np.ndarray] = {}

    def step(
        self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
    ) -> dict[str, np.ndarray]:
        """Return updated copies of ``params``; inputs are not modified."""
        self.step_count += 1
        correction1 = 1.0 - self.beta1**self.step_count
        correction2 = 1.0 - self.beta2**self.step_count
        updated = {}
        for name, value in params.items():
            grad = grads[name]
            first = self._first.get(name, np.zeros_like(value))
            second = self._second.get(name, np.zeros_like(value))
            first = self.beta1 * first + (1.0 - self.beta1) * grad
            second = self.beta2 * second + (1.0 - self.beta2) * grad**2
            self._first[name], self._second[name] = first, second
            m_hat = first / correction1
            v_hat = second / correction2
            updated[name] = value - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
        return updated
