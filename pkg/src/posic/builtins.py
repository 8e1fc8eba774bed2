"""Built-in plants used throughout the examples and presets."""

from __future__ import annotations

import numpy as np

from .sysmodel import LtiSystem, NonlinearSystem

EXAMPLE1_NOTICE = (
    "example1: the printed state matrix has A[1,1] = +1 (not Hurwitz); the built-in "
    "uses -1, which matches the linearized matrix and characteristic polynomial "
    "given alongside it"
)


def example1() -> LtiSystem:
    return LtiSystem(
        A=[[-1.0, 0.0], [1.0, -1.0]],
        B=[1.0, 0.0],
        C=[0.0, 1.0],
        name="example1",
        notes=(EXAMPLE1_NOTICE,),
    )


def gene_expression(gamma1: float = 1.0, gamma2: float = 1.0, k2: float = 1.0, E=None) -> LtiSystem:
    """mRNA x1 driven by the transcription rate u, protein x2 measured."""
    return LtiSystem(
        A=[[-gamma1, 0.0], [k2, -gamma2]],
        B=[1.0, 0.0],
        C=[0.0, 1.0],
        E=E,
        name="gene_expression",
    )


def maturation(
    k1: float = 1.0,
    k2: float = 1.0,
    k3: float = 1.0,
    gamma1: float = 1.0,
    gamma2: float = 1.0,
    gamma3: float = 1.0,
    E=None,
) -> LtiSystem:
    """Gene expression with protein maturation; the output is the mature protein.

    The transcription rate is the control input, so ``k1`` (the open-loop
    transcription rate) does not enter the controlled model. It is accepted
    for parity with the open-loop description.
    """
    del k1
    return LtiSystem(
        A=[[-gamma1, 0.0, 0.0], [k2, -(gamma2 + k3), 0.0], [0.0, k3, -gamma3]],
        B=[1.0, 0.0, 0.0],
        C=[0.0, 0.0, 1.0],
        E=E,
        name="maturation",
    )


def spr_network(gamma: float = 2.0, k1: float = 1.0, k2: float = 1.0, E=None) -> LtiSystem:
    return LtiSystem(
        A=[[-gamma, k1], [k2, -gamma]],
        B=[0.0, 1.0],
        C=[0.0, 1.0],
        E=E,
        name="spr_network",
    )


def sis(beta: float = 1.0, N: float = 100.0) -> NonlinearSystem:
    """Reduced SIS model; state is the susceptible count, input the recovery rate."""

    def f(x, u):
        return np.array([(N - x[0]) * (u - beta * x[0])])

    def jac_x(x, u):
        return np.array([[-(u - beta * x[0]) - beta * (N - x[0])]])

    def jac_u(x, u):
        return np.array([N - x[0]])

    def steady(u):
        return np.array([min(u / beta, N)])

    return NonlinearSystem(
        dim=1,
        f=f,
        h=lambda x: float(x[0]),
        jac_x=jac_x,
        jac_u=jac_u,
        jac_h=lambda x: np.array([1.0]),
        steady_state=steady,
        x_seed=np.array([0.5 * N]),
        u_range=(0.0, beta * N),
        name="sis",
        builtin_id="sis",
        params={"beta": beta, "N": N},
        positive=True,
    )


def repressed_translation(
    k1: float = 1.0, k2: float = 1.0, gamma1: float = 1.0, gamma2: float = 1.0
) -> NonlinearSystem:
    """Gene expression whose translation is repressed by the input."""

    def f(x, u):
        return np.array([-gamma1 * x[0] + k1, k2 * x[0] / (1.0 + u) - gamma2 * x[1]])

    def jac_x(x, u):
        return np.array([[-gamma1, 0.0], [k2 / (1.0 + u), -gamma2]])

    def jac_u(x, u):
        return np.array([0.0, -k2 * x[0] / (1.0 + u) ** 2])

    def steady(u):
        x1 = k1 / gamma1
        return np.array([x1, k2 * x1 / (gamma2 * (1.0 + u))])

    return NonlinearSystem(
        dim=2,
        f=f,
        h=lambda x: float(x[1]),
        jac_x=jac_x,
        jac_u=jac_u,
        jac_h=lambda x: np.array([0.0, 1.0]),
        steady_state=steady,
        x_seed=np.array([k1 / gamma1, k1 * k2 / (gamma1 * gamma2)]),
        u_range=(0.0, 100.0),
        name="repressed_translation",
        builtin_id="repressed_translation",
        params={"k1": k1, "k2": k2, "gamma1": gamma1, "gamma2": gamma2},
        positive=True,
    )


BUILTINS = {
    "example1": example1,
    "gene_expression": gene_expression,
    "maturation": maturation,
    "sis": sis,
    "repressed_translation": repressed_translation,
    "spr_network": spr_network,
}


def build(name: str, **params):
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown built-in system {name!r}; known: {sorted(BUILTINS)}") from None
    return factory(**params)
