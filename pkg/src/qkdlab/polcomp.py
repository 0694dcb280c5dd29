"""Polarization algebra, chopper-wheel tomography and waveplate compensation.

Conventions
-----------
Stokes vectors are ``(S0, S1, S2, S3)`` with H = +S1, D = +S2 and right
circular R = +S3. Mueller matrices act on column Stokes vectors. A linear
retarder with fast axis at angle theta (from H) and retardance delta uses the
standard form, so a quarter-wave plate at 45 degrees maps H to R.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from ._parallel import pmap
from .errors import NoSignalError, OptimizationError, UnidentifiableChannelError

PROJECTORS = ("H", "V", "D", "A", "R", "L")
BB84_LABELS = ("H", "V", "D", "A")

PROJECTOR_VECTORS = {
    "H": np.array([1.0, 0.0, 0.0]),
    "V": np.array([-1.0, 0.0, 0.0]),
    "D": np.array([0.0, 1.0, 0.0]),
    "A": np.array([0.0, -1.0, 0.0]),
    "R": np.array([0.0, 0.0, 1.0]),
    "L": np.array([0.0, 0.0, -1.0]),
}


@dataclass(frozen=True, eq=False)
class StokesState:
    S: np.ndarray
    clip_scale: float = 1.0

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float).reshape(4)
        if not S[0] > 0:
            raise ValueError("S0 must be positive")
        if np.linalg.norm(S[1:]) > S[0] * (1 + 1e-9):
            raise ValueError("unphysical Stokes vector (DOP > 1)")
        S.setflags(write=False)
        object.__setattr__(self, "S", S)

    @classmethod
    def from_vector(cls, v, s0: float = 1.0) -> "StokesState":
        v = np.asarray(v, dtype=float)
        return cls(np.concatenate([[s0], s0 * v]))

    @property
    def vector(self) -> np.ndarray:
        """Normalized Poincare vector (length = DOP)."""
        return self.S[1:] / self.S[0]

    @property
    def dop(self) -> float:
        return float(min(1.0, np.linalg.norm(self.vector)))

    def __repr__(self):
        return f"StokesState({np.array2string(self.S, precision=4)})"


def ideal_state(label: str) -> StokesState:
    return StokesState.from_vector(PROJECTOR_VECTORS[label])


def ideal_states() -> dict[str, StokesState]:
    return {k: ideal_state(k) for k in BB84_LABELS}


@dataclass(frozen=True, eq=False)
class PolarizationTransform:
    mueller: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.mueller, dtype=float).reshape(4, 4)
        M.setflags(write=False)
        object.__setattr__(self, "mueller", M)

    @classmethod
    def identity(cls) -> "PolarizationTransform":
        return cls(np.eye(4))

    @classmethod
    def from_rotation(cls, R) -> "PolarizationTransform":
        """Non-depolarizing channel acting as rotation ``R`` on the Poincare sphere."""
        M = np.eye(4)
        M[1:, 1:] = np.asarray(R, dtype=float)
        return cls(M)

    @classmethod
    def retarder(cls, theta_deg: float, retardance: float) -> "PolarizationTransform":
        return cls(_retarder_mueller(np.radians(theta_deg), retardance))

    @classmethod
    def depolarizer(cls, dop_factor: float) -> "PolarizationTransform":
        return cls(np.diag([1.0, dop_factor, dop_factor, dop_factor]))

    @property
    def rotation(self) -> np.ndarray:
        return self.mueller[1:, 1:]

    def __matmul__(self, other: "PolarizationTransform") -> "PolarizationTransform":
        return PolarizationTransform(self.mueller @ other.mueller)


def _retarder_rotation(theta: float, delta: float) -> np.ndarray:
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    cd, sd = np.cos(delta), np.sin(delta)
    return np.array([
        [c * c + s * s * cd, c * s * (1 - cd), -s * sd],
        [c * s * (1 - cd), s * s + c * c * cd, c * sd],
        [s * sd, -c * sd, cd],
    ])


def _retarder_mueller(theta: float, delta: float) -> np.ndarray:
    M = np.eye(4)
    M[1:, 1:] = _retarder_rotation(theta, delta)
    return M


@dataclass(frozen=True)
class WaveplateStack:
    """Quarter-, half-, quarter-wave plate angles in degrees, in propagation order."""

    theta1: float = 0.0
    theta2: float = 0.0
    theta3: float = 0.0

    def __post_init__(self):
        for name in ("theta1", "theta2", "theta3"):
            object.__setattr__(self, name, float(getattr(self, name)) % 180.0)

    @property
    def angles(self) -> tuple[float, float, float]:
        return (self.theta1, self.theta2, self.theta3)


def _stack_rotation(angles_deg) -> np.ndarray:
    t1, t2, t3 = np.radians(angles_deg)
    q1 = _retarder_rotation(t1, np.pi / 2)
    h = _retarder_rotation(t2, np.pi)
    q3 = _retarder_rotation(t3, np.pi / 2)
    return q3 @ h @ q1


def waveplate_transform(stack: WaveplateStack) -> PolarizationTransform:
    """Mueller matrix of QWP(theta1), then HWP(theta2), then QWP(theta3)."""
    return PolarizationTransform.from_rotation(_stack_rotation(stack.angles))


def apply_transform(T: PolarizationTransform, s: StokesState) -> StokesState:
    out = T.mueller @ s.S
    return StokesState(out)


@dataclass(frozen=True)
class ProjectorCounts:
    counts: Mapping[str, int]
    integration_time: float = 1.0

    def __post_init__(self):
        missing = [p for p in PROJECTORS if p not in self.counts]
        if missing:
            raise ValueError(f"missing projector counts: {missing}")
        clean = {}
        for p in PROJECTORS:
            n = self.counts[p]
            if n < 0 or int(n) != n:
                raise ValueError(f"count for {p} must be a nonnegative integer, got {n}")
            clean[p] = int(n)
        object.__setattr__(self, "counts", clean)

    def __getitem__(self, key):
        return self.counts[key]


def expected_counts(state: StokesState, per_projector: float) -> dict[str, float]:
    """Malus-law expectation of counts behind each chopper polarizer."""
    v = state.vector
    return {p: per_projector * 0.5 * (1.0 + v @ PROJECTOR_VECTORS[p]) for p in PROJECTORS}


def sample_counts(state: StokesState, per_projector: float, rng: np.random.Generator,
                  integration_time: float = 1.0) -> ProjectorCounts:
    lam = expected_counts(state, per_projector)
    return ProjectorCounts({p: int(rng.poisson(lam[p])) for p in PROJECTORS}, integration_time)


def stokes_from_counts(counts: ProjectorCounts) -> StokesState:
    """Reconstruct a normalized Stokes state from six projector counts.

    Each component is normalized by the total of its own projector pair, which
    equals the H+V normalization when exposures are balanced. If shot noise
    pushes the DOP above one, the vector is scaled back onto the sphere and
    the scale factor is kept in ``clip_scale``.
    """
    n = counts.counts
    if sum(n.values()) == 0:
        raise NoSignalError("all projector counts are zero")
    if n["H"] + n["V"] == 0:
        raise NoSignalError("no counts behind the H/V polarizers")
    comps = []
    for a, b in (("H", "V"), ("D", "A"), ("R", "L")):
        tot = n[a] + n[b]
        comps.append((n[a] - n[b]) / tot if tot else 0.0)
    v = np.array(comps)
    norm = np.linalg.norm(v)
    scale = 1.0
    if norm > 1.0:
        scale = 1.0 / norm
        v = v * scale
    return StokesState(np.concatenate([[1.0], v]), clip_scale=scale)


def dop(s: StokesState) -> float:
    return s.dop


def purity(s: StokesState) -> float:
    """Density-operator purity Tr(rho^2) = (1 + DOP^2)/2."""
    return 0.5 * (1.0 + s.dop**2)


def _target_vector(target) -> np.ndarray:
    if isinstance(target, str):
        return PROJECTOR_VECTORS[target]
    if isinstance(target, StokesState):
        v = target.vector
    else:
        v = np.asarray(target, dtype=float)
        if v.shape == (4,):
            v = v[1:] / v[0]
    return v / np.linalg.norm(v)


def fidelity(s: StokesState, target) -> float:
    """Overlap with a pure target state: (1 + s.t)/2 using the DOP-weighted vector."""
    return 0.5 * (1.0 + float(s.vector @ _target_vector(target)))


def _as_state_list(states) -> list[StokesState]:
    if isinstance(states, Mapping):
        return [states[k] for k in BB84_LABELS]
    states = list(states)
    if len(states) != 4:
        raise ValueError("expected four states for inputs H, V, D, A")
    return states


def predicted_qber(states, stack: WaveplateStack | None = None) -> float:
    """Mean error probability of the four BB84 states, optionally after a waveplate stack."""
    vecs = np.array([s.vector for s in _as_state_list(states)])
    return _qber_of_vectors(vecs, None if stack is None else _stack_rotation(stack.angles))


_TARGETS = np.array([PROJECTOR_VECTORS[k] for k in BB84_LABELS])


def _qber_of_vectors(vecs: np.ndarray, R: np.ndarray | None) -> float:
    if R is not None:
        vecs = vecs @ R.T
    return float(np.mean(0.5 * (1.0 - np.sum(vecs * _TARGETS, axis=1))))


@dataclass(frozen=True)
class ChannelFit:
    transform: PolarizationTransform
    residual: float


def fit_channel(measured) -> ChannelFit:
    """Least-squares Poincare-sphere rotation taking ideal H, V, D, A to the measured states.

    The residual is the sum of squared distances between the rotated ideals
    and the measured (DOP-weighted) vectors; it grows with the purity deficit.
    """
    meas = np.array([s.vector for s in _as_state_list(measured)])
    sv = np.linalg.svd(meas, compute_uv=False)
    if sv[0] < 1e-9 or sv[1] < 1e-6 * sv[0]:
        raise UnidentifiableChannelError("measured states are collinear on the Poincare sphere")
    M = meas.T @ _TARGETS
    U, _, Vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(U @ Vt)) or 1.0
    R = U @ np.diag([1.0, 1.0, d]) @ Vt
    residual = float(np.sum((_TARGETS @ R.T - meas) ** 2))
    return ChannelFit(PolarizationTransform.from_rotation(R), residual)


@dataclass(frozen=True)
class CompensationResult:
    stack: WaveplateStack
    predicted_qber: float
    initial_qber: float

    @property
    def improved(self) -> bool:
        return self.predicted_qber < self.initial_qber


def optimize_compensation(measured, starts: int = 8, seed: int = 0,
                          xatol: float = 1e-4) -> CompensationResult:
    """Waveplate angles minimizing the predicted QBER of the measured states.

    Multi-start Nelder-Mead on the three-angle torus. The identity stack
    (all zeros) is always one of the starts, so the result never does worse
    than leaving the plates alone.
    """
    states = _as_state_list(measured)
    fit_channel(states)  # rejects unidentifiable inputs up front
    vecs = np.array([s.vector for s in states])
    initial = _qber_of_vectors(vecs, None)

    def objective(x):
        return _qber_of_vectors(vecs, _stack_rotation(x))

    rng = np.random.default_rng(seed)
    x0s = [np.zeros(3)] + [rng.uniform(0, 180, 3) for _ in range(max(starts, 8))]

    def run(x0):
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": xatol, "fatol": 1e-14, "maxiter": 4000,
                                "initial_simplex": x0 + np.vstack([np.zeros(3), 30 * np.eye(3)])})
        return float(res.fun), res.x

    results = pmap(run, x0s)
    best_f, best_x = min(results, key=lambda r: r[0])
    if best_f > initial + 1e-12:
        raise OptimizationError(f"optimizer ended above the identity stack ({best_f} > {initial})")
    stack = WaveplateStack(*best_x)
    return CompensationResult(stack, predicted_qber(states, stack), initial)


def rotation_matrix(axis, angle_rad: float) -> np.ndarray:
    """Right-handed rotation about ``axis`` (Rodrigues)."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle_rad) * K + (1 - np.cos(angle_rad)) * K @ K


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-random element of SO(3)."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def _tilted(label: str, dop_value: float, tilt_deg: float, toward) -> StokesState:
    t = PROJECTOR_VECTORS[label]
    u = np.asarray(toward, dtype=float)
    u = u - (u @ t) * t
    u /= np.linalg.norm(u)
    a = np.radians(tilt_deg)
    return StokesState.from_vector(dop_value * (np.cos(a) * t + np.sin(a) * u))


def paper_intrinsic_states() -> dict[str, StokesState]:
    """Impure source states with mean purity 0.91 and mean fidelity 0.94.

    V and D carry lower purity and larger phase-like tilts than H and A,
    with tilts in directions no single rotation can undo.
    """
    return {
        "H": _tilted("H", 0.95, 8.0, PROJECTOR_VECTORS["R"]),
        "V": _tilted("V", 0.86, 17.7, PROJECTOR_VECTORS["R"]),
        "D": _tilted("D", 0.86, 17.7, PROJECTOR_VECTORS["R"]),
        "A": _tilted("A", 0.95, 8.0, PROJECTOR_VECTORS["L"]),
    }


def apply_to_states(T: PolarizationTransform, states) -> dict[str, StokesState]:
    lst = _as_state_list(states)
    return {k: apply_transform(T, s) for k, s in zip(BB84_LABELS, lst)}
