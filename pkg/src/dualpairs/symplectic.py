"""Canonical symplectic linear algebra on R^(2n) and Hamiltonian flows.

Conventions, fixed once and verified by the test suite:

* coordinates are ordered ``(q1..qn, p1..pn)``;
* ``omega = sum_i dq^i wedge dp_i``;
* ``i_{X_h} omega = dh``, hence ``X_h = (dh/dp, -dh/dq)``;
* ``{g, h} = omega(X_g, X_h) = sum_i (dg/dq^i dh/dp_i - dg/dp_i dh/dq^i)``.

Under these conventions the Jacobi-Lie bracket of Hamiltonian fields
satisfies ``[X, Y] = -X_{omega(X, Y)}``; the exact-arithmetic module
asserts that relation on polynomial data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import SolverDivergenceError

__all__ = [
    "METHODS",
    "FlowSpec",
    "Observable",
    "advance",
    "canonical_omega",
    "flow",
    "hamiltonian_vector_field",
    "phase_point",
    "poisson_bracket_value",
]

METHODS = ("implicit-midpoint", "stormer-verlet", "rk4")

# Central-difference step scale for gradient fallbacks (see Observable).
_FD_SCALE = float(np.cbrt(np.finfo(float).eps))

_FIXED_POINT_TOL = 1e-13
_FIXED_POINT_MAX_ITER = 50


def phase_point(coords: Sequence[float]) -> np.ndarray:
    """Validate canonical coordinates ``(q1..qn, p1..pn)``.

    Returns a float copy.  The length must be even and at least 2.
    """
    m = np.array(coords, dtype=float)
    if m.ndim != 1 or m.size < 2 or m.size % 2 != 0:
        raise ValueError(
            f"phase point must be a flat even-length vector of length >= 2, got shape {m.shape}"
        )
    return m


def _fd_gradient(value: Callable[[np.ndarray], np.ndarray]) -> Callable[[np.ndarray], np.ndarray]:
    """Fourth-order central-difference gradient of a scalar callable.

    The step is ``cbrt(eps) * (1 + |m|)`` per evaluation point.  Broadcasts
    over leading axes, like the analytic gradients supplied by polynomial
    observables.
    """

    def gradient(m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        h = _FD_SCALE * (1.0 + np.sqrt(np.sum(m * m, axis=-1)))
        out = np.empty_like(m)
        for i in range(m.shape[-1]):
            mp = m.copy()
            mm = m.copy()
            mp2 = m.copy()
            mm2 = m.copy()
            mp[..., i] += h
            mm[..., i] -= h
            mp2[..., i] += 2.0 * h
            mm2[..., i] -= 2.0 * h
            num = 8.0 * (np.asarray(value(mp)) - np.asarray(value(mm)))
            num -= np.asarray(value(mp2)) - np.asarray(value(mm2))
            out[..., i] = num / (12.0 * h)
        return out

    return gradient


class Observable:
    """A scalar function on R^(2n) together with its gradient.

    Parameters
    ----------
    value:
        Callable mapping arrays of shape ``(..., 2n)`` to shape ``(...)``.
        Vectorization over leading axes is part of the contract; everything
        the package constructs (polynomial observables, momentum functions)
        satisfies it.
    gradient:
        Optional callable of the same broadcasting shape returning
        ``(..., 2n)``.  When omitted, a fourth-order central-difference
        fallback with step ``cbrt(eps) * (1 + |m|)`` is used.
    separable:
        Set when ``h(q, p) = T(p) + V(q)``; only separable observables are
        accepted by the Stoermer-Verlet integrator.
    """

    def __init__(
        self,
        value: Callable[[np.ndarray], np.ndarray],
        gradient: Callable[[np.ndarray], np.ndarray] | None = None,
        *,
        separable: bool = False,
        name: str = "",
    ):
        self._value = value
        self._gradient = gradient if gradient is not None else _fd_gradient(value)
        self.separable = bool(separable)
        self.name = name

    def value(self, m) -> np.ndarray:
        return np.asarray(self._value(np.asarray(m, dtype=float)), dtype=float)

    def gradient(self, m) -> np.ndarray:
        return np.asarray(self._gradient(np.asarray(m, dtype=float)), dtype=float)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        label = self.name or "<callable>"
        return f"Observable({label}, separable={self.separable})"


@dataclass(frozen=True)
class FlowSpec:
    """Time-stepping request: method, step size, number of steps."""

    method: str = "implicit-midpoint"
    dt: float = 1e-3
    steps: int = 100

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not (float(self.dt) > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 0:
            raise ValueError(f"steps must be a nonnegative integer, got {self.steps}")


def _split(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = u.shape[-1] // 2
    return u[..., :n], u[..., n:]


def canonical_omega(u, v) -> float | np.ndarray:
    """Evaluate ``omega(u, v) = sum_i (u_q^i v_p_i - u_p_i v_q^i)``.

    Accepts single vectors or stacks of vectors (shape ``(..., 2n)``);
    bilinear and antisymmetric.  Mismatched or odd lengths raise
    ``ValueError``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    if u.shape[-1] % 2 != 0 or u.shape[-1] < 2:
        raise ValueError(f"vectors must have even length >= 2, got {u.shape[-1]}")
    uq, up = _split(u)
    vq, vp = _split(v)
    w = np.einsum("...i,...i->...", uq, vp) - np.einsum("...i,...i->...", up, vq)
    return float(w) if w.ndim == 0 else w


def hamiltonian_vector_field(h: Observable, m) -> np.ndarray:
    """Return ``X_h(m) = (dh/dp, -dh/dq)``; broadcasts over stacked points."""
    m = np.asarray(m, dtype=float)
    g = h.gradient(m)
    gq, gp = _split(g)
    return np.concatenate([gp, -gq], axis=-1)


def poisson_bracket_value(g: Observable, h: Observable, m) -> float | np.ndarray:
    """Canonical bracket ``{g, h}(m) = omega(X_g(m), X_h(m))``."""
    return canonical_omega(hamiltonian_vector_field(g, m), hamiltonian_vector_field(h, m))


def _midpoint_step(h: Observable, m: np.ndarray, dt: float, step_index: int) -> np.ndarray:
    # Fixed-point iteration for m' = m + dt * X_h((m + m') / 2), Euler predictor.
    # The convergence test is the max-norm over the whole batch, so the
    # iteration count depends only on the multiset of states; permuting a
    # batch commutes with this map bit for bit.
    with np.errstate(over="ignore", invalid="ignore"):
        y = m + dt * hamiltonian_vector_field(h, m)
        for _ in range(_FIXED_POINT_MAX_ITER):
            y_next = m + dt * hamiltonian_vector_field(h, 0.5 * (m + y))
            delta = float(np.max(np.abs(y_next - y)))
            y = y_next
            if delta <= _FIXED_POINT_TOL * (1.0 + float(np.max(np.abs(y)))):
                return y
    raise SolverDivergenceError(step_index)


def _verlet_step(h: Observable, m: np.ndarray, dt: float) -> np.ndarray:
    n = m.shape[-1] // 2
    q, p = _split(m)
    g = h.gradient(m)
    p_half = p - 0.5 * dt * g[..., :n]
    m1 = np.concatenate([q, p_half], axis=-1)
    q_new = q + dt * h.gradient(m1)[..., n:]
    m2 = np.concatenate([q_new, p_half], axis=-1)
    p_new = p_half - 0.5 * dt * h.gradient(m2)[..., :n]
    return np.concatenate([q_new, p_new], axis=-1)


def _rk4_step(h: Observable, m: np.ndarray, dt: float) -> np.ndarray:
    k1 = hamiltonian_vector_field(h, m)
    k2 = hamiltonian_vector_field(h, m + 0.5 * dt * k1)
    k3 = hamiltonian_vector_field(h, m + 0.5 * dt * k2)
    k4 = hamiltonian_vector_field(h, m + dt * k3)
    return m + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _step_once(h: Observable, m: np.ndarray, spec: FlowSpec, step_index: int) -> np.ndarray:
    if spec.method == "implicit-midpoint":
        return _midpoint_step(h, m, spec.dt, step_index)
    if spec.method == "stormer-verlet":
        return _verlet_step(h, m, spec.dt)
    return _rk4_step(h, m, spec.dt)


def _check_method(h: Observable, spec: FlowSpec) -> None:
    if spec.method == "stormer-verlet" and not h.separable:
        raise ValueError(
            "stormer-verlet requires a separable observable "
            "(construct the Observable with separable=True)"
        )


def advance(h: Observable, state, spec: FlowSpec):
    """Advance a state (or a whole stack of states) through ``spec.steps`` steps.

    Returns only the endpoint; use :func:`flow` for full trajectories of a
    single phase point.
    """
    _check_method(h, spec)
    m = np.asarray(state, dtype=float)
    for k in range(spec.steps):
        m = _step_once(h, m, spec, k)
    return m


def flow(h: Observable, m0, spec: FlowSpec) -> np.ndarray:
    """Integrate the Hamiltonian flow of ``h`` from ``m0``.

    Returns an array of shape ``(steps + 1, 2n)`` whose first row is ``m0``.
    Implicit midpoint (the symplectic default) uses a fixed-point iteration
    with tolerance 1e-13 and at most 50 iterations per step; non-convergence
    raises :class:`SolverDivergenceError` carrying the step index.
    """
    _check_method(h, spec)
    m = phase_point(m0)
    out = np.empty((spec.steps + 1, m.size), dtype=float)
    out[0] = m
    for k in range(spec.steps):
        m = _step_once(h, m, spec, k)
        out[k + 1] = m
    return out
