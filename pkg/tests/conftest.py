import math

import numpy as np
import pytest

from thermalwave import materials
from thermalwave.forward import FrequencyGrid
from thermalwave.wavecore import CoatingStack


def effusivity_for(R, e_from):
    """Effusivity below an interface that produces downward reflection R."""
    return e_from * (1.0 - R) / (1.0 + R)


def one_layer_stack(R0, R1, L_over_mu, omega=2 * math.pi, alpha=1e-7, e1=1000.0):
    """Single coating realizing the given reflection coefficients and thickness ratio."""
    mu = math.sqrt(2 * alpha / omega)
    return CoatingStack.from_arrays(
        [alpha], [e1, effusivity_for(R1, e1)], [L_over_mu * mu],
        ambient_effusivity=effusivity_for(R0, e1),
    )


def random_stack(rng, n, r_max=0.95, lmu=(0.05, 3.0), omega=2 * math.pi):
    """Random n-layer stack with every |R| <= r_max and L/mu in ``lmu`` at ``omega``."""
    e = [float(rng.uniform(200, 3000))]
    for _ in range(n):
        e.append(effusivity_for(rng.uniform(-r_max, r_max), e[-1]))
    e0 = effusivity_for(rng.uniform(-r_max, r_max), e[0])
    alpha = rng.uniform(5e-8, 5e-7, n)
    mu = np.sqrt(2 * alpha / omega)
    L = rng.uniform(*lmu, n) * mu
    return CoatingStack.from_arrays(alpha, e, L, ambient_effusivity=e0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


@pytest.fixture
def paint2():
    return materials.reference_stack(2, thickness=40e-6)


@pytest.fixture
def grid10():
    return FrequencyGrid.logspace(0.5, 20.0, 10)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" in props and rep.when == "call":
                status = "PASS" if rep.passed else "FAIL"
                lines.append((props["criterion"], f"[{status}] criterion {props['criterion']}: {props['detail']}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda t: int(t[0].split()[0])):
            terminalreporter.write_line(line)
