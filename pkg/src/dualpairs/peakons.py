"""Singular geodesic solutions on the diffeomorphism group at finite rank.

A singular state is a finite support set: positions ``Q``, covector
densities ``P`` and positive masses ``w``, together with a kernel (the
Green's function of the inertia operator).  The collective Hamiltonian

    H = 1/2 sum_{a,b} (P_a . P_b) G(Q_a - Q_b) w_a w_b

drives the canonical N-body equations; in one dimension with the
exponential kernel these are the peakon equations.  A filament state
additionally orders its support points on a closed chain, which makes the
current ``m = <P, d_s Q>`` meaningful as a discrete momentum density on the
chain and exact reparametrization (chain rotation) available as a group
action.

Time stepping reuses the canonical integrators: in the rescaled variables
``(Q, P w)`` the equations are canonical with this Hamiltonian, so the
implicit midpoint rule is symplectic for them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .fields import format_float
from .symplectic import FlowSpec, Observable, flow

__all__ = [
    "FilamentState",
    "KernelSpec",
    "SingularState",
    "Trajectory",
    "collective_hamiltonian",
    "integrate",
    "kernel_eval",
    "kernel_grad",
    "filament_current",
    "pair_with_field",
    "reparametrize",
    "rhs",
    "total_momentum",
    "write_trajectory_csv",
]

KERNEL_FAMILIES = ("exp1d", "gaussian")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and length scale.

    ``exp1d`` is ``G(x) = exp(-|x| / alpha) / (2 alpha)``, the Green's
    function of ``1 - alpha^2 d^2/dx^2`` on the line; it is only valid in
    one dimension and uses the symmetric convention ``G'(0) = 0``.
    ``gaussian`` is ``G(x) = exp(-|x|^2 / (2 alpha^2))`` in any dimension
    (the exact planar Green's function is singular at the origin, so smooth
    kernels are the default beyond d = 1).
    """

    family: str = "exp1d"
    alpha: float = 1.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"kernel family must be one of {KERNEL_FAMILIES}, got {self.family!r}")
        if not (float(self.alpha) > 0.0):
            raise ValueError(f"kernel length scale must be positive, got {self.alpha}")


def _check_kernel_dim(k: KernelSpec, d: int) -> None:
    if k.family == "exp1d" and d != 1:
        raise ValueError(f"the exp1d kernel is one-dimensional, got points with d = {d}")


def kernel_eval(k: KernelSpec, x: np.ndarray) -> np.ndarray:
    """Evaluate G on an array of displacement vectors of shape (..., d)."""
    x = np.asarray(x, dtype=float)
    _check_kernel_dim(k, x.shape[-1])
    if k.family == "exp1d":
        return np.exp(-np.abs(x[..., 0]) / k.alpha) / (2.0 * k.alpha)
    r2 = np.einsum("...i,...i->...", x, x)
    return np.exp(-r2 / (2.0 * k.alpha**2))


def kernel_grad(k: KernelSpec, x: np.ndarray) -> np.ndarray:
    """Gradient of G, shape (..., d); zero at x = 0 for both families."""
    x = np.asarray(x, dtype=float)
    _check_kernel_dim(k, x.shape[-1])
    if k.family == "exp1d":
        g = -np.sign(x[..., 0]) * np.exp(-np.abs(x[..., 0]) / k.alpha) / (2.0 * k.alpha**2)
        return g[..., None]
    return -x / k.alpha**2 * kernel_eval(k, x)[..., None]


@dataclass(frozen=True, eq=False)
class SingularState:
    """Positions, covector densities, and masses of a singular solution."""

    q: np.ndarray
    p: np.ndarray
    kernel: KernelSpec
    weights: np.ndarray | None = None

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        p = np.atleast_2d(np.asarray(self.p, dtype=float))
        if q.ndim != 2 or q.shape[0] < 1:
            raise ValueError(f"positions must form an (A, d) array, got shape {q.shape}")
        if p.shape != q.shape:
            raise ValueError(f"covector shape {p.shape} does not match position shape {q.shape}")
        _check_kernel_dim(self.kernel, q.shape[1])
        if self.weights is None:
            w = self._default_weights(q.shape[0])
        else:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (q.shape[0],):
                raise ValueError(f"weights shape {w.shape} != ({q.shape[0]},)")
            if not np.all(w > 0.0):
                raise ValueError("all weights must be positive")
        for arr in (q, p, w):
            arr.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "weights", w)

    @staticmethod
    def _default_weights(a: int) -> np.ndarray:
        return np.ones(a)

    @property
    def count(self) -> int:
        return self.q.shape[0]

    @property
    def dim(self) -> int:
        return self.q.shape[1]


@dataclass(frozen=True, eq=False)
class FilamentState(SingularState):
    """A singular state whose points are ordered on a closed chain.

    The chain is ``s in {0 .. A-1} / A`` with spacing ``1/A``; default
    weights are the chain measure ``1/A``.  Positions must be pairwise
    distinct (a finite surrogate for the embedding condition).  With
    ``nonvanishing=True``, covectors are also required to be nonzero at
    every node.
    """

    nonvanishing: bool = False

    def __post_init__(self):
        super().__post_init__()
        dq = self.q[:, None, :] - self.q[None, :, :]
        dist2 = np.einsum("abi,abi->ab", dq, dq)
        np.fill_diagonal(dist2, np.inf)
        if self.count > 1 and not np.min(dist2) > 0.0:
            raise ValueError("filament positions must be pairwise distinct")
        if self.nonvanishing and not np.all(np.einsum("ai,ai->a", self.p, self.p) > 0.0):
            raise ValueError("filament covectors must be nonzero at every node")

    @staticmethod
    def _default_weights(a: int) -> np.ndarray:
        return np.full(a, 1.0 / a)

    @property
    def spacing(self) -> float:
        return 1.0 / self.count


# -- collective dynamics -------------------------------------------------------


def collective_hamiltonian(st: SingularState) -> float:
    """``1/2 sum_{a,b} (P_a . P_b) G(Q_a - Q_b) w_a w_b`` (order-independent sum)."""
    dq = st.q[:, None, :] - st.q[None, :, :]
    g = kernel_eval(st.kernel, dq)
    pp = st.p @ st.p.T
    ww = np.outer(st.weights, st.weights)
    return 0.5 * math.fsum((pp * g * ww).ravel())


def rhs(st: SingularState) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives (Qdot, Pdot) of the collective equations.

    ``Qdot_a = sum_b P_b G(Q_a - Q_b) w_b`` and
    ``Pdot_a = -sum_b (P_a . P_b) grad G(Q_a - Q_b) w_b``; the masses enter
    so that P stays a density per unit of the reference measure.
    """
    dq = st.q[:, None, :] - st.q[None, :, :]
    g = kernel_eval(st.kernel, dq)
    dg = kernel_grad(st.kernel, dq)
    qdot = np.einsum("ab,bi,b->ai", g, st.p, st.weights)
    pdot = -np.einsum("ab,abi,b->ai", st.p @ st.p.T, dg, st.weights)
    return qdot, pdot


def _collective_observable(template: SingularState) -> Observable:
    """The Hamiltonian as a function of the canonical variables (Q, P w).

    Rescaling the covectors by the masses makes the weighted N-body system
    canonical, so the generic symplectic steppers apply unchanged.
    """
    a, d = template.count, template.dim
    k = template.kernel

    def split(z: np.ndarray):
        head = z.shape[:-1]
        return z[..., : a * d].reshape(head + (a, d)), z[..., a * d :].reshape(head + (a, d))

    def value(z: np.ndarray):
        q, pt = split(z)
        dq = q[..., :, None, :] - q[..., None, :, :]
        g = kernel_eval(k, dq)
        pp = np.einsum("...ai,...bi->...ab", pt, pt)
        return 0.5 * np.einsum("...ab,...ab->...", pp, g)

    def gradient(z: np.ndarray):
        q, pt = split(z)
        dq = q[..., :, None, :] - q[..., None, :, :]
        g = kernel_eval(k, dq)
        dg = kernel_grad(k, dq)
        pp = np.einsum("...ai,...bi->...ab", pt, pt)
        dq_grad = np.einsum("...ab,...abi->...ai", pp, dg)
        dpt_grad = np.einsum("...ab,...bi->...ai", g, pt)
        head = z.shape[:-1]
        return np.concatenate(
            [dq_grad.reshape(head + (a * d,)), dpt_grad.reshape(head + (a * d,))], axis=-1
        )

    return Observable(value, gradient, name="collective")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled collective flow: times plus (Q, P) at each step.

    ``q`` and ``p`` have shape (steps + 1, A, d); weights and the kernel are
    constant along the flow.  ``chain=True`` marks filament trajectories.
    """

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    weights: np.ndarray
    kernel: KernelSpec
    chain: bool = False
    nonvanishing: bool = False

    def __len__(self) -> int:
        return self.times.shape[0]

    def state_at(self, i: int) -> SingularState:
        if self.chain:
            return FilamentState(self.q[i], self.p[i], self.kernel, self.weights, self.nonvanishing)
        return SingularState(self.q[i], self.p[i], self.kernel, self.weights)

    def hamiltonians(self) -> np.ndarray:
        dq = self.q[:, :, None, :] - self.q[:, None, :, :]
        g = kernel_eval(self.kernel, dq)
        pp = np.einsum("tai,tbi->tab", self.p, self.p)
        ww = np.outer(self.weights, self.weights)
        terms = pp * g * ww
        return 0.5 * np.array([math.fsum(t.ravel()) for t in terms])

    def total_momenta(self) -> np.ndarray:
        """``sum_a P_a w_a`` at each time, shape (steps + 1, d)."""
        cols = []
        for i in range(self.p.shape[2]):
            terms = self.p[:, :, i] * self.weights
            cols.append([math.fsum(row) for row in terms])
        return np.array(cols).T

    def filament_currents(self) -> np.ndarray:
        """Per-node current ``<P, D_s Q>`` at each time, shape (steps + 1, A)."""
        if not self.chain:
            raise ValueError("currents are defined only for filament (chain) trajectories")
        return _chain_current(self.q, self.p)

    def jr_drifts(self) -> np.ndarray:
        """Relative max-node drift of the current from its initial value.

        Zero by convention for point (non-chain) states, where the chain
        current does not exist.
        """
        if not self.chain:
            return np.zeros(len(self))
        m = self.filament_currents()
        scale = float(np.max(np.abs(m[0])))
        if scale == 0.0:
            scale = 1.0
        return np.max(np.abs(m - m[0]), axis=1) / scale


def _chain_current(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    a = q.shape[-2]
    dq = (np.roll(q, -1, axis=-2) - np.roll(q, 1, axis=-2)) * (a / 2.0)
    return np.einsum("...ai,...ai->...a", p, dq)


def integrate(st: SingularState, spec: FlowSpec) -> Trajectory:
    """Run the collective flow; implicit midpoint is the intended default.

    Raises :class:`~dualpairs.errors.SolverDivergenceError` (with the step
    index) if an implicit solve fails to contract, e.g. near collision with
    a gaussian kernel at large dt.
    """
    a, d = st.count, st.dim
    z0 = np.concatenate([st.q.ravel(), (st.p * st.weights[:, None]).ravel()])
    path = flow(_collective_observable(st), z0, spec)
    steps = path.shape[0]
    q = path[:, : a * d].reshape(steps, a, d)
    pt = path[:, a * d :].reshape(steps, a, d)
    p = pt / st.weights[:, None]
    times = np.arange(steps) * spec.dt
    return Trajectory(
        times=times,
        q=q,
        p=p,
        weights=st.weights,
        kernel=st.kernel,
        chain=isinstance(st, FilamentState),
        nonvanishing=getattr(st, "nonvanishing", False),
    )


# -- momentum pairings and the chain action ------------------------------------


def pair_with_field(st: SingularState, x_field) -> float:
    """Pair the point-supported momentum with a vector field on the target.

    ``x_field`` is either a callable mapping an (A, d) array of positions to
    an (A, d) array of vectors, or a constant d-vector.  Returns
    ``sum_a <P_a, X(Q_a)> w_a`` as an order-independent sum.
    """
    if callable(x_field):
        xv = np.asarray(x_field(st.q), dtype=float)
        if xv.shape != st.q.shape:
            raise ValueError(f"field values shape {xv.shape} != {st.q.shape}")
    else:
        xv = np.broadcast_to(np.asarray(x_field, dtype=float), st.q.shape)
    terms = np.einsum("ai,ai->a", st.p, xv) * st.weights
    return math.fsum(terms)


def total_momentum(st: SingularState) -> np.ndarray:
    """``sum_a P_a w_a`` — the translation charge, one component per target axis."""
    return np.array([math.fsum(st.p[:, i] * st.weights) for i in range(st.dim)])


def filament_current(st: FilamentState) -> np.ndarray:
    """Per-node ``<P_a, D_s Q_a>`` with centered periodic differences.

    This is the momentum density on the chain; it is conserved nodewise by
    the collective flow up to O(dt^2) time-stepping and O(A^-2) differencing
    error, and permutes exactly under chain rotations.
    """
    if not isinstance(st, FilamentState):
        raise ValueError("the chain current needs an ordered (filament) state")
    return _chain_current(st.q, st.p)


def reparametrize(st: SingularState, shift: int) -> SingularState:
    """Rotate the support labels by ``shift`` (an exact chain diffeomorphism).

    Pure array relabeling: sums over the support (Hamiltonian, pairings
    with target fields) are exactly invariant, and the chain current of a
    filament rotates by the same shift bit for bit.
    """
    shift = int(shift)
    kwargs = {"nonvanishing": st.nonvanishing} if isinstance(st, FilamentState) else {}
    return type(st)(
        np.roll(st.q, -shift, axis=0),
        np.roll(st.p, -shift, axis=0),
        st.kernel,
        np.roll(st.weights, -shift),
        **kwargs,
    )


# -- serialization --------------------------------------------------------------


def write_trajectory_csv(path, traj: Trajectory) -> None:
    """One row per step: t, flattened Q, flattened P, H, total momentum, jr drift."""
    a, d = traj.q.shape[1], traj.q.shape[2]
    header = (
        ["t"]
        + [f"q_{i + 1}" for i in range(a * d)]
        + [f"p_{i + 1}" for i in range(a * d)]
        + ["H"]
        + [f"Ptot_{i + 1}" for i in range(d)]
        + ["jr_drift"]
    )
    energies = traj.hamiltonians()
    momenta = traj.total_momenta()
    drifts = traj.jr_drifts()
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for i in range(len(traj)):
            row = [format_float(traj.times[i])]
            row += [format_float(x) for x in traj.q[i].ravel()]
            row += [format_float(x) for x in traj.p[i].ravel()]
            row.append(format_float(energies[i]))
            row += [format_float(x) for x in momenta[i]]
            row.append(format_float(drifts[i]))
            writer.writerow(row)
