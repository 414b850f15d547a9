"""The four-step optimizer framework shared by every trainer.

Each step (1) takes gradients g, (2) updates the first momentum m and the
second momentum V, (3) forms the step eta = alpha * m / (sqrt(V) + eps) and
(4) applies theta <- theta - eta.

Instantiations:
  sgd       m = g, no denominator: theta - alpha * g exactly
  momentum  m = beta1 * m + (1 - beta1) * g, no denominator
  adaptive  m as above, V = beta2 * V + (1 - beta2) * g**2, full denominator

No bias correction is applied to m or V.
"""

import math
from abc import ABC, abstractmethod
from typing import Any, Mapping

import numpy as np

from app.exceptions import GradientError, ShapeError
from app.models.constants import OptimizerKind
from app.models.optim_model import OptimizerConfig, OptimizerState


class IOptimizer(ABC):
    @abstractmethod
    def init_state(self, params: Mapping[str, np.ndarray]) -> OptimizerState:
        pass

    @abstractmethod
    def step(
        self,
        state: OptimizerState,
        params: Mapping[str, np.ndarray],
        grads: Mapping[str, np.ndarray],
    ) -> tuple[dict[str, np.ndarray], OptimizerState]:
        pass

    @abstractmethod
    def reset(self, state: OptimizerState) -> OptimizerState:
        pass


class FrameworkOptimizer(IOptimizer):
    def __init__(self, config: OptimizerConfig | None = None):
        self.config = config or OptimizerConfig()

    def init_state(self, params: Mapping[str, np.ndarray]) -> OptimizerState:
        return OptimizerState(
            config=self.config,
            m={name: np.zeros_like(p, dtype=np.float64) for name, p in params.items()},
            V={name: np.zeros_like(p, dtype=np.float64) for name, p in params.items()},
        )

    def reset(self, state: OptimizerState) -> OptimizerState:
        return OptimizerState(
            config=state.config,
            t=0,
            m={name: np.zeros_like(a) for name, a in state.m.items()},
            V={name: np.zeros_like(a) for name, a in state.V.items()},
        )

    def step(
        self,
        state: OptimizerState,
        params: Mapping[str, np.ndarray],
        grads: Mapping[str, np.ndarray],
    ) -> tuple[dict[str, np.ndarray], OptimizerState]:
        """Pure full-tensor update; returns new params and a new state."""
        new_params: dict[str, np.ndarray] = {}
        new_m: dict[str, np.ndarray] = dict(state.m)
        new_V: dict[str, np.ndarray] = dict(state.V)
        for name, param in params.items():
            param = np.asarray(param, dtype=np.float64)
            grad = np.asarray(grads[name], dtype=np.float64)
            if grad.shape != param.shape:
                raise ShapeError(
                    f"gradient for '{name}' has shape {grad.shape}, expected {param.shape}"
                )
            if not np.all(np.isfinite(grad)):
                raise GradientError(name)
            m = state.m.get(name, np.zeros_like(param))
            V = state.V.get(name, np.zeros_like(param))
            m, V, eta = self._direction(m, V, grad)
            new_params[name] = param - eta
            new_m[name] = m
            new_V[name] = V
        new_state = OptimizerState(config=state.config, t=state.t + 1, m=new_m, V=new_V)
        return new_params, new_state

    def step_at(
        self,
        state: OptimizerState,
        name: str,
        param: np.ndarray,
        grad: Any,
        index: Any,
    ) -> None:
        """In-place update of ``param[index]``; the SGD trainers' hot path.

        One optimisation step may touch several slices; ``state.t`` only moves
        on ``advance``.
        """
        if isinstance(grad, float):
            if not math.isfinite(grad):
                raise GradientError(name)
        elif not np.all(np.isfinite(grad)):
            raise GradientError(name)
        if name not in state.m:
            state.m[name] = np.zeros_like(param, dtype=np.float64)
            state.V[name] = np.zeros_like(param, dtype=np.float64)
        config = self.config
        if config.kind is OptimizerKind.SGD:
            state.m[name][index] = grad
            param[index] = param[index] - config.alpha * grad
            return
        m, V, eta = self._direction(state.m[name][index], state.V[name][index], grad)
        state.m[name][index] = m
        state.V[name][index] = V
        param[index] = param[index] - eta

    def advance(self, state: OptimizerState) -> None:
        """Closes one optimisation step after all of its slices were updated."""
        state.t += 1

    def _direction(self, m: Any, V: Any, grad: Any) -> tuple[Any, Any, Any]:
        config = self.config
        if config.kind is OptimizerKind.SGD:
            return grad, V, config.alpha * grad
        m = config.beta1 * m + (1.0 - config.beta1) * grad
        if config.kind is OptimizerKind.MOMENTUM:
            return m, V, config.alpha * m
        V = config.beta2 * V + (1.0 - config.beta2) * grad * grad
        return m, V, config.alpha * m / (np.sqrt(V) + config.epsilon)


def make_optimizer(
    kind: OptimizerKind | str = OptimizerKind.SGD, alpha: float = 0.01, **overrides: Any
) -> FrameworkOptimizer:
    return FrameworkOptimizer(
        OptimizerConfig(kind=OptimizerKind(kind), alpha=alpha, **overrides)
    )
