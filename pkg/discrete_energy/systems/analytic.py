"""Ground-truth energies and vector fields of the benchmark systems."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Union

import numpy as np

from discrete_energy.config import EnergySettings, get_settings
from discrete_energy.tensor import Precision, Tensor, grad, no_record
from discrete_energy.tensor import ops as F

from .operators import GSpec, apply_G, build_D, build_D2, build_S, build_SminusR, forward_difference, second_difference

logger = logging.getLogger(__name__)

TensorFn = Callable[[Tensor], Tensor]

PDE_SYSTEMS = ("kdv", "cahn_hilliard")
ODE_SYSTEMS = ("mass_spring", "pendulum", "twobody")

_ALIASES = {
    "kdv": "kdv",
    "ch": "cahn_hilliard",
    "cahn_hilliard": "cahn_hilliard",
    "cahn-hilliard": "cahn_hilliard",
    "mass_spring": "mass_spring",
    "mass-spring": "mass_spring",
    "spring": "mass_spring",
    "pendulum": "pendulum",
    "twobody": "twobody",
    "two_body": "twobody",
    "2-body": "twobody",
    "2body": "twobody",
}


class UnknownSystemError(ValueError):
    """The requested benchmark system does not exist."""


def canonical_name(name: str) -> str:
    try:
        return _ALIASES[name.strip().lower()]
    except KeyError as exc:
        raise UnknownSystemError(f"Unknown system: {name!r}") from exc


@dataclass(frozen=True)
class AnalyticSystem:
    """A benchmark system ``(H, G, u)`` with its exact gradient.

    ``metric_weight`` is the quadrature weight of the discrete inner product:
    the vector field is ``G (grad H / metric_weight)``.
    """

    name: str
    energy_fn: TensorFn
    gradient_fn: TensorFn
    gspec: GSpec
    state_dim: int
    metric_weight: float = 1.0
    extras: Mapping[str, Any] = field(default_factory=dict)
    potential_gradient: Optional[TensorFn] = None
    kinetic_gradient: Optional[TensorFn] = None

    @property
    def is_pde(self) -> bool:
        return self.name in PDE_SYSTEMS

    @property
    def separable(self) -> bool:
        return self.potential_gradient is not None and self.kinetic_gradient is not None

    def energy(self, u: Tensor) -> Tensor:
        return self.energy_fn(u)

    def gradient(self, u: Tensor) -> Tensor:
        return self.gradient_fn(u)

    def autodiff_gradient(self, u: Tensor) -> Tensor:
        _, (g,) = grad(lambda x: F.reduce_sum(self.energy_fn(x)), [u])
        return g

    def rhs(self, u: Tensor) -> Tensor:
        return apply_G(self.gspec, F.scale(self.gradient_fn(u), 1.0 / self.metric_weight))

    def dV(self, q: Tensor) -> Tensor:
        if self.potential_gradient is None:
            raise ValueError(f"{self.name} is not separable")
        return self.potential_gradient(q)

    def dT(self, p: Tensor) -> Tensor:
        if self.kinetic_gradient is None:
            raise ValueError(f"{self.name} is not separable")
        return self.kinetic_gradient(p)

    def energy_values(self, states: np.ndarray, precision: Union[str, Precision] = Precision.DOUBLE) -> np.ndarray:
        """Energies of a ``(steps, dim)`` array, evaluated without recording."""
        with no_record():
            values = self.energy_fn(Tensor(np.asarray(states), precision))
        return np.array(values.data, dtype=np.float64)

    def rhs_values(self, states: np.ndarray, precision: Union[str, Precision] = Precision.DOUBLE) -> np.ndarray:
        with no_record():
            values = self.rhs(Tensor(np.asarray(states), precision))
        return np.array(values.data, dtype=np.float64)

    def mass_values(self, states: np.ndarray) -> np.ndarray:
        """``dx * sum(u)`` per state; ODE systems report the plain sum."""
        return self.metric_weight * np.sum(np.asarray(states, dtype=np.float64), axis=-1)

    def descriptor(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"name": self.name, "state_dim": self.state_dim}
        out.update(self.extras)
        friction = self.gspec.friction
        if friction is not None and np.any(friction.data > 0):
            out["friction"] = self.gspec.friction_values().tolist()
        return out


def _last_axis_sum(x: Tensor) -> Tensor:
    return F.reduce_sum(x, axis=-1)


def _broadcast_last(x: Tensor, shape: Sequence[int]) -> Tensor:
    return F.expand(F.reshape(x, x.shape + (1,)), shape)


def kdv_system(n_points: int = 50, dx: float = 0.2, alpha: float = -6.0, beta: float = 1.0) -> AnalyticSystem:
    """Korteweg-de Vries: ``H = dx * sum(-alpha/6 u^3 - beta/2 (D+ u)^2)`` with ``G = D``.

    The forward difference in the gradient term makes ``grad H / dx`` equal
    ``-alpha/2 u^2 + beta D2 u`` exactly.
    """
    if n_points < 5:
        raise ValueError("KdV needs N >= 5")

    def energy(u: Tensor) -> Tensor:
        slope = forward_difference(u, dx)
        density = F.sub(F.scale(F.mul(F.mul(u, u), u), -alpha / 6.0), F.scale(F.mul(slope, slope), 0.5 * beta))
        return F.scale(_last_axis_sum(density), dx)

    def gradient(u: Tensor) -> Tensor:
        inner = F.add(F.scale(F.mul(u, u), -0.5 * alpha), F.scale(second_difference(u, dx), beta))
        return F.scale(inner, dx)

    return AnalyticSystem(
        name="kdv",
        energy_fn=energy,
        gradient_fn=gradient,
        gspec=build_D(n_points, dx),
        state_dim=n_points,
        metric_weight=dx,
        extras={"n_points": n_points, "dx": dx, "alpha": alpha, "beta": beta},
    )


def ch_system(n_points: int = 50, dx: float = 0.02, gamma: float = 0.0005) -> AnalyticSystem:
    """Cahn-Hilliard: ``H = dx * sum(1/4 (u^2 - 1)^2 + gamma/2 (D+ u)^2)`` with ``G = D2``."""
    if n_points < 5:
        raise ValueError("Cahn-Hilliard needs N >= 5")
    if gamma <= 0:
        raise ValueError("gamma must be positive")

    def energy(u: Tensor) -> Tensor:
        well = F.shift(F.mul(u, u), -1.0)
        slope = forward_difference(u, dx)
        density = F.add(F.scale(F.mul(well, well), 0.25), F.scale(F.mul(slope, slope), 0.5 * gamma))
        return F.scale(_last_axis_sum(density), dx)

    def gradient(u: Tensor) -> Tensor:
        cubic = F.mul(F.shift(F.mul(u, u), -1.0), u)
        return F.scale(F.sub(cubic, F.scale(second_difference(u, dx), gamma)), dx)

    return AnalyticSystem(
        name="cahn_hilliard",
        energy_fn=energy,
        gradient_fn=gradient,
        gspec=build_D2(n_points, dx),
        state_dim=n_points,
        metric_weight=dx,
        extras={"n_points": n_points, "dx": dx, "gamma": gamma},
    )


def _ode_gspec(n: int, friction: Union[float, Sequence[float], None]) -> GSpec:
    if friction is None:
        return build_S(n)
    return build_SminusR(n, friction)


def _join(q_part: Tensor, p_part: Tensor, dim: int) -> Tensor:
    half = dim // 2
    return F.add(F.scatter(q_part, np.arange(half), dim), F.scatter(p_part, np.arange(half, dim), dim))


def _mass_spring(friction, settings: EnergySettings) -> AnalyticSystem:
    def energy(u: Tensor) -> Tensor:
        return F.scale(_last_axis_sum(F.mul(u, u)), 0.5)

    def gradient(u: Tensor) -> Tensor:
        return F.scale(u, 1.0)

    return AnalyticSystem(
        name="mass_spring",
        energy_fn=energy,
        gradient_fn=gradient,
        gspec=_ode_gspec(1, friction),
        state_dim=2,
        extras={},
        potential_gradient=lambda q: F.scale(q, 1.0),
        kinetic_gradient=lambda p: F.scale(p, 1.0),
    )


def _pendulum(friction, settings: EnergySettings) -> AnalyticSystem:
    m, g, length = settings.pendulum_mass, settings.pendulum_gravity, settings.pendulum_length
    stiffness = 2.0 * m * g * length
    inertia = m * length * length

    def energy(u: Tensor) -> Tensor:
        q = F.take(u, [0])
        p = F.take(u, [1])
        potential = F.scale(F.shift(F.neg(F.cos(q)), 1.0), stiffness)
        kinetic = F.scale(F.mul(p, p), 0.5 / inertia)
        return _last_axis_sum(F.add(potential, kinetic))

    def d_potential(q: Tensor) -> Tensor:
        return F.scale(F.sin(q), stiffness)

    def d_kinetic(p: Tensor) -> Tensor:
        return F.scale(p, 1.0 / inertia)

    def gradient(u: Tensor) -> Tensor:
        return _join(d_potential(F.take(u, [0])), d_kinetic(F.take(u, [1])), 2)

    return AnalyticSystem(
        name="pendulum",
        energy_fn=energy,
        gradient_fn=gradient,
        gspec=_ode_gspec(1, friction),
        state_dim=2,
        extras={"mass": m, "gravity": g, "length": length},
        potential_gradient=d_potential,
        kinetic_gradient=d_kinetic,
    )


def _twobody(friction, settings: EnergySettings) -> AnalyticSystem:
    """Two unit masses in the plane; state ``(q1, q2, p1, p2)`` in R^8."""
    coupling = settings.gravitational_constant

    def separation(q: Tensor) -> Tensor:
        return F.sub(F.take(q, [0, 1]), F.take(q, [2, 3]))

    def potential(q: Tensor) -> Tensor:
        r = separation(q)
        distance = F.sqrt(_last_axis_sum(F.mul(r, r)))
        return F.reciprocal(distance, -coupling)

    def d_potential(q: Tensor) -> Tensor:
        r = separation(q)
        squared = _last_axis_sum(F.mul(r, r))
        cubed = F.mul(squared, F.sqrt(squared))
        pull = F.mul(r, _broadcast_last(F.reciprocal(cubed, coupling), r.shape))
        return F.add(F.scatter(pull, [0, 1], 4), F.scatter(F.neg(pull), [2, 3], 4))

    def d_kinetic(p: Tensor) -> Tensor:
        return F.scale(p, 1.0)

    q_idx, p_idx = [0, 1, 2, 3], [4, 5, 6, 7]

    def energy(u: Tensor) -> Tensor:
        p = F.take(u, p_idx)
        return F.add(F.scale(_last_axis_sum(F.mul(p, p)), 0.5), potential(F.take(u, q_idx)))

    def gradient(u: Tensor) -> Tensor:
        return _join(d_potential(F.take(u, q_idx)), d_kinetic(F.take(u, p_idx)), 8)

    return AnalyticSystem(
        name="twobody",
        energy_fn=energy,
        gradient_fn=gradient,
        gspec=_ode_gspec(4, friction),
        state_dim=8,
        extras={"gravitational_constant": coupling},
        potential_gradient=d_potential,
        kinetic_gradient=d_kinetic,
    )


_ODE_BUILDERS = {"mass_spring": _mass_spring, "pendulum": _pendulum, "twobody": _twobody}


def ode_system(
    name: str,
    friction: Union[float, Sequence[float], None] = None,
    settings: Optional[EnergySettings] = None,
) -> AnalyticSystem:
    """Hamiltonian benchmark ``name``; a ``friction`` turns ``G = S`` into ``S - R``."""
    key = canonical_name(name)
    if key not in _ODE_BUILDERS:
        raise UnknownSystemError(f"{name!r} is not an ODE system")
    return _ODE_BUILDERS[key](friction, settings or get_settings())


def system_from_descriptor(descriptor: Mapping[str, Any], settings: Optional[EnergySettings] = None) -> AnalyticSystem:
    """Rebuild a system from the parameters recorded in a dataset manifest."""
    key = canonical_name(str(descriptor.get("name", "")))
    if key == "kdv":
        return kdv_system(
            int(descriptor.get("n_points", 50)),
            float(descriptor.get("dx", 0.2)),
            float(descriptor.get("alpha", -6.0)),
            float(descriptor.get("beta", 1.0)),
        )
    if key == "cahn_hilliard":
        return ch_system(
            int(descriptor.get("n_points", 50)),
            float(descriptor.get("dx", 0.02)),
            float(descriptor.get("gamma", 0.0005)),
        )
    return ode_system(key, descriptor.get("friction"), settings)
