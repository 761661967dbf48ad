"""Performance benchmarking tests.

Run with: pytest tests/performance/ -m performance
"""

import time

import numpy as np
import pytest

from discrete_energy.discrete import discrete_gradient
from discrete_energy.integrators import StepperConfig, rollout
from discrete_energy.systems import kdv_system
from discrete_energy.tensor import Tensor, grad
from discrete_energy.tensor import ops as F


def autodiff_gradient(model, u: Tensor) -> Tensor:
    _, (g,) = grad(lambda x: F.reduce_sum(model.energy(x)), [Tensor(u.data, u.precision)])
    return g


@pytest.mark.performance
@pytest.mark.benchmark(group="mlp-gradient")
def test_benchmark_mlp_backward(benchmark, mlp_pair):
    model, u, _ = mlp_pair
    result = benchmark(autodiff_gradient, model, u)
    assert result.shape == u.shape


@pytest.mark.performance
@pytest.mark.benchmark(group="mlp-gradient")
def test_benchmark_mlp_discrete_gradient(benchmark, mlp_pair):
    model, u, v = mlp_pair
    result = benchmark(discrete_gradient, model, u, v)
    assert result.dg.shape == u.shape


@pytest.mark.performance
@pytest.mark.benchmark(group="conv-gradient")
def test_benchmark_conv_backward(benchmark, conv_pair):
    model, u, _ = conv_pair
    result = benchmark(autodiff_gradient, model, u)
    assert result.shape == u.shape


@pytest.mark.performance
@pytest.mark.benchmark(group="conv-gradient")
def test_benchmark_conv_discrete_gradient(benchmark, conv_pair):
    model, u, v = conv_pair
    result = benchmark(discrete_gradient, model, u, v)
    assert result.dg.shape == u.shape


def best_time(fn, *args, repeats: int = 7) -> float:
    fn(*args)
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        timings.append(time.perf_counter() - start)
    return min(timings)


@pytest.mark.performance
@pytest.mark.parametrize("pair", ["mlp_pair", "conv_pair"])
def test_discrete_gradient_costs_at_most_two_and_a_half_backwards(pair, request):
    model, u, v = request.getfixturevalue(pair)
    backward_time = best_time(autodiff_gradient, model, u)
    discrete_time = best_time(discrete_gradient, model, u, v)
    ratio = discrete_time / backward_time
    print(f"\n{pair}: backward {backward_time * 1e3:.2f} ms, discrete {discrete_time * 1e3:.2f} ms, ratio {ratio:.2f}")
    assert ratio <= 2.5


@pytest.mark.performance
@pytest.mark.benchmark(group="kdv-rollout")
@pytest.mark.parametrize("kind", ["dg", "rk2"])
def test_benchmark_kdv_rollout(benchmark, kind):
    system = kdv_system(50, 0.2)
    x = 0.2 * np.arange(50)
    u0 = 2.0 / np.cosh(x - 5.0) ** 2
    config = StepperConfig(kind=kind, dt=0.001)
    result = benchmark.pedantic(rollout, args=(config, system, u0), kwargs={"n_steps": 20}, rounds=3, iterations=1)
    assert result.states.shape == (21, 50)
