"""
Spectral and Lyapunov certification of the closed-loop matrices.

The closed loop of one axis in deviation coordinates is

    Gamma = [[0, I], [-k Lr, -b Lr]]

with Lr the reduced Laplacian. When Lr is triangular its spectrum is the
union of the roots of s^2 + b mu s + k mu over the diagonal entries mu.

"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigvals, eigvalsh

from laneless.dynamics import StateVector
from laneless.equilibrium import solve_x_equilibrium, solve_y_equilibrium
from laneless.formation import Axis, FormationSnapshot, GainParams
from laneless.graph import LaplacianBundle

# Agreement required between the dense and the closed-form spectrum.
SPECTRUM_TOLERANCE = 1e-8

# Relative grid of cross-term weights tried when building a certificate.
CROSS_TERM_GRID = np.geomspace(1e-6, 1.0, 121)


def axis_gains(axis: Axis, gains: GainParams) -> Tuple[float, float]:
    """
    Return (k, b) for the given axis.

    """
    if axis == Axis.Y:
        return gains.k, gains.b
    return gains.k_x, gains.b_x


def gamma(reduced, k, b):
    m = reduced.shape[0]
    return np.block([[np.zeros((m, m)), np.eye(m)], [-k * reduced, -b * reduced]])


def closed_form_spectrum(reduced, k, b):
    """
    Roots of s^2 + b mu s + k mu for every diagonal entry mu of `reduced`.

    """
    roots = []
    for mu in np.diag(reduced):
        roots.extend(np.roots([1.0, b * mu, k * mu]) if mu != 0 else [0.0, 0.0])
    return sort_spectrum(np.array(roots, dtype=complex))


def sort_spectrum(values):
    values = np.asarray(values, dtype=complex)
    # Rounded real parts keep conjugate pairs ordered by their imaginary part.
    return values[np.lexsort((values.imag, np.round(values.real, 9)))]


def gamma_spectrum(bundle: LaplacianBundle, gains: GainParams):
    """
    All eigenvalues of the closed-loop matrix of `bundle`, sorted by real
    then imaginary part.

    Triangular reduced Laplacians are cross-checked against the closed form.

    """
    k, b = axis_gains(bundle.axis, gains)
    reduced = bundle.reduced
    if reduced.size == 0:
        return np.array([], dtype=complex)

    spectrum = sort_spectrum(eigvals(gamma(reduced, k, b)))

    diagonal = np.diag(reduced)
    # Repeated diagonal entries give defective eigenvalues the dense solver only resolves to sqrt(eps).
    if bundle.is_lower_triangular() and len(np.unique(diagonal)) == len(diagonal):
        expected = closed_form_spectrum(reduced, k, b)
        error = np.max(np.abs(spectrum - expected))
        if error > SPECTRUM_TOLERANCE:
            logging.warning(f"{bundle.axis.value} spectrum differs from the closed form by {error:.2e}")
    else:
        logging.debug(f"{bundle.axis.value} spectrum not cross-checked against the closed form")

    return spectrum


@dataclass(frozen=True, eq=False)
class Certificate:
    """
    Quadratic Lyapunov function V = w' P w common to a set of modes.

    P = [[I/q, eps I], [eps I, I]]. `negdef_margin` is the largest
    eigenvalue of Gamma' P + P Gamma over all modes and is negative for a
    valid certificate.

    """

    q: float
    epsilon: float
    P: np.ndarray
    negdef_margin: float

    def value(self, w):
        w = np.asarray(w, dtype=float)
        return float(w @ self.P @ w)

    def as_dict(self):
        return {"q": self.q, "epsilon": self.epsilon, "negdef_margin": self.negdef_margin}


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: Tuple[complex, ...]
    hurwitz: bool
    spectral_margin: float
    lyapunov: Optional[Certificate] = None

    def as_dict(self):
        return {
            "eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
            "hurwitz": self.hurwitz,
            "spectral_margin": self.spectral_margin,
            "lyapunov": self.lyapunov.as_dict() if self.lyapunov is not None else "inapplicable",
        }


def analyze(bundle: LaplacianBundle, gains: GainParams) -> StabilityReport:
    """
    Spectrum, Hurwitz flag and certificate of a single mode.

    The margin of a triangular mode is taken from the closed form, which is
    exact where the dense solver loses accuracy on repeated eigenvalues.

    """
    spectrum = gamma_spectrum(bundle, gains)
    exact = spectrum
    if bundle.is_lower_triangular():
        exact = closed_form_spectrum(bundle.reduced, *axis_gains(bundle.axis, gains))
    margin = float(-np.max(exact.real)) if exact.size else float("inf")
    certificate = lyapunov_certificate([bundle], gains)
    return StabilityReport(tuple(complex(e) for e in spectrum), margin > 0, margin, certificate)


def symmetric_part_minimum(reduced):
    return float(eigvalsh((reduced + reduced.T) / 2)[0])


def _cross_term_P(m, q, epsilon):
    identity = np.eye(m)
    return np.block([[identity / q, epsilon * identity], [epsilon * identity, identity]])


def lyapunov_certificate(bundles: Sequence[LaplacianBundle], gains: GainParams) -> Optional[Certificate]:
    """
    Search a common quadratic certificate for one or more modes.

    q is fixed at 2 / (k lambda), lambda being the smallest eigenvalue of the
    symmetric parts of the reduced Laplacians, and the cross-term weight is
    searched on a grid that keeps P positive definite. Returns None when a
    symmetric part is not positive definite or when no grid point makes
    every Gamma' P + P Gamma negative definite.

    """
    if isinstance(bundles, LaplacianBundle):
        bundles = [bundles]
    bundles = [b for b in bundles if b.reduced.size]
    if not bundles:
        return None

    sizes = {b.reduced.shape[0] for b in bundles}
    if len(sizes) != 1:
        logging.debug(f"Modes have different state sizes {sorted(sizes)}, no common certificate")
        return None

    k, b = axis_gains(bundles[0].axis, gains)
    if k <= 0 or b <= 0:
        return None

    smallest = min(symmetric_part_minimum(bundle.reduced) for bundle in bundles)
    if smallest <= 0:
        logging.debug("Symmetric part of a reduced Laplacian is not positive definite, certificate inapplicable")
        return None

    q = 2.0 / (k * smallest)
    m = sizes.pop()
    gammas = [gamma(bundle.reduced, k, b) for bundle in bundles]

    best = None
    for epsilon in CROSS_TERM_GRID * np.sqrt(1.0 / q):
        P = _cross_term_P(m, q, epsilon)
        margin = max(float(eigvalsh(g.T @ P + P @ g)[-1]) for g in gammas)
        if best is None or margin < best.negdef_margin:
            best = Certificate(q, float(epsilon), P, margin)

    if best.negdef_margin >= 0:
        logging.debug(f"No cross-term certificate found, best margin {best.negdef_margin:.3e}")
        return None
    return best


def impulse_admissible(state_before: StateVector, delta) -> bool:
    """
    True when shifting the deviation positions by `delta` does not increase
    their Euclidean norm.

    `state_before` is in deviation coordinates. `delta` is the position
    block or a full vector with a zero velocity block.

    """
    m = len(state_before.ids)
    delta = np.asarray(delta, dtype=float)[:m]
    before = state_before.positions
    return bool(np.linalg.norm(before + delta) <= np.linalg.norm(before))


def longitudinal_deviation(
    snapshot: FormationSnapshot, bundle: LaplacianBundle, gains: GainParams, leader_v0
) -> StateVector:
    """
    Deviation of the Y state cars from the equilibrium set by the leader.

    """
    leader = snapshot.leader
    inputs = {car: snapshot.car(car).y for car in bundle.input_ids if car != leader.id}
    equilibrium = solve_y_equilibrium(bundle, gains.g_y, leader.y, inputs)
    _, y, _, vy = snapshot.arrays(bundle.state_ids)
    return StateVector(Axis.Y, bundle.state_ids, np.concatenate([y - equilibrium[bundle.state_rows], vy - leader_v0]))


def lateral_deviation(snapshot: FormationSnapshot, bundle_x: LaplacianBundle, C, g_x) -> StateVector:
    """
    Deviation of the X state cars from the equilibrium L x = -g_x C.

    """
    inputs = {car: snapshot.car(car).x for car in bundle_x.input_ids}
    equilibrium = solve_x_equilibrium(bundle_x, C, g_x, inputs)
    x, _, vx, _ = snapshot.arrays(bundle_x.state_ids)
    return StateVector(Axis.X, bundle_x.state_ids, np.concatenate([x - equilibrium[bundle_x.state_rows], vx]))


@dataclass(frozen=True)
class LyapunovTraceReport:
    times: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()
    max_step_increase: float = 0.0
    max_jump_increase: float = 0.0
    violations: List[float] = field(default_factory=list)

    @property
    def empty(self):
        return not self.times


def lyapunov_trace_check(times, states, P, switch_times=(), impulse_times=(), tolerance=1e-8) -> LyapunovTraceReport:
    """
    Evaluate V = w' P w along a run given in deviation coordinates.

    `states` holds one deviation vector per time. Increases between samples
    that straddle a switch or impulse instant count as jumps, the others as
    steps. Times where a step increase exceeds `tolerance` are reported as
    violations.

    """
    if not len(times):
        return LyapunovTraceReport()

    P = np.asarray(P, dtype=float)
    values = [float(np.asarray(w) @ P @ np.asarray(w)) for w in states]
    events = sorted(set(switch_times) | set(impulse_times))

    step_increase, jump_increase, violations = 0.0, 0.0, []
    for i in range(1, len(values)):
        increase = values[i] - values[i - 1]
        jumped = any(times[i - 1] < t <= times[i] for t in events)
        if jumped:
            jump_increase = max(jump_increase, increase)
            continue
        step_increase = max(step_increase, increase)
        if increase > tolerance:
            violations.append(times[i])

    return LyapunovTraceReport(tuple(times), tuple(values), step_increase, jump_increase, violations)
