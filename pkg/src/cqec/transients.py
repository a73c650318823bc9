"""Synthesized resonator transients for post-flip syndrome dynamics.

After a bit flip the readout resonator takes a finite time to re-settle,
so the syndrome means sweep gradually between their steady values
instead of jumping.  The reference measurement tables are not available,
so the 94-step templates are synthesized from the closed-form cavity
response: the complex field amplitude spirals from the old steady state
to the new one at the post-state rotation frequency while decaying at
kappa/2, and the syndrome mean is the projection of that spiral onto the
quadrature separating the two steady states, normalized so the steady
even/odd responses map to +1/-1.

Channels whose syndrome is unchanged by a transition keep a flat
template at the unchanged value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import N_STATES, QUBIT_MASKS, SYNDROME_TABLE

TEMPLATE_STEPS = 94


@dataclass(frozen=True)
class ResonatorParams:
    """Cavity response parameters (angular frequencies in rad/s).

    The excited/ground responses differ through the drive detuning, so
    `detuning` must be nonzero for the syndrome channels to separate.
    Defaults give a transient that settles to ~5% in about 2 us with a
    visible damped oscillation, matching the reference device phenomenology.
    """

    drive: float = 1.0
    detuning: float = 2 * np.pi * 0.25e6
    dispersive_shift: float = 2 * np.pi * 0.8e6
    linewidth: float = 3.0e6


def resonator_response(t, params: ResonatorParams):
    """Closed-form transient field amplitudes (alpha_e, alpha_g) at time t.

    alpha_{e/g}(t) = [2 eps / (2 chi +- 2 delta_r + i kappa)]
                     * (exp(-i (chi +- delta_r) t) exp(-kappa t / 2) - 1)
    with the upper sign for the excited and the lower for the ground
    response.  Starts at zero and settles exponentially at rate kappa/2.
    """
    if params.linewidth <= 0:
        raise ValueError("resonator linewidth kappa must be > 0")
    t = np.asarray(t, dtype=float)
    out = []
    for sign in (+1.0, -1.0):
        denom = 2 * params.dispersive_shift + sign * 2 * params.detuning \
            + 1j * params.linewidth
        if denom == 0:
            raise ZeroDivisionError("2*chi +- 2*delta_r + i*kappa vanished")
        omega = params.dispersive_shift + sign * params.detuning
        envelope = np.exp(-1j * omega * t) * np.exp(-params.linewidth * t / 2.0)
        out.append(2 * params.drive / denom * (envelope - 1.0))
    return out[0], out[1]


def steady_amplitudes(params: ResonatorParams):
    """t -> infinity limits of the transient response, (alpha_e, alpha_g)."""
    out = []
    for sign in (+1.0, -1.0):
        denom = 2 * params.dispersive_shift + sign * 2 * params.detuning \
            + 1j * params.linewidth
        out.append(-2 * params.drive / denom)
    return out[0], out[1]


@dataclass(frozen=True)
class TransientTemplate:
    """94-step syndrome-mean table for one single-flip transition."""

    pre_state: int
    post_state: int
    means: np.ndarray  # (TEMPLATE_STEPS, 2)


def _channel_sweep(s_pre: float, s_post: float, times: np.ndarray,
                   params: ResonatorParams) -> np.ndarray:
    """Normalized mean sweep s_pre -> s_post following the cavity spiral."""
    alpha_e, alpha_g = steady_amplitudes(params)
    steady = {+1.0: alpha_e, -1.0: alpha_g}
    # Rotation frequency of the post state: chi + delta_r for even (e),
    # chi - delta_r for odd (g), matching the response formula.
    omega = params.dispersive_shift + s_post * params.detuning
    spiral = steady[s_post] + (steady[s_pre] - steady[s_post]) \
        * np.exp(-1j * omega * times) * np.exp(-params.linewidth * times / 2.0)
    # Project onto the quadrature separating the steady responses.
    u = alpha_e - alpha_g
    if abs(u) < 1e-12 * max(abs(alpha_e), abs(alpha_g), 1e-300):
        raise ValueError(
            "steady excited/ground responses coincide; a nonzero drive "
            "detuning is required to separate the syndrome channels"
        )
    phase = np.exp(-1j * np.angle(u))
    proj = (spiral * phase).real
    m_e = (alpha_e * phase).real
    m_g = (alpha_g * phase).real
    return (2.0 * proj - m_e - m_g) / (m_e - m_g)


def build_transient_templates(params: ResonatorParams, dt: float,
                              n_steps: int = TEMPLATE_STEPS,
                              settle_tol: float = 0.05,
                              ) -> dict[tuple[int, int], TransientTemplate]:
    """Templates for all 24 single-flip transitions.

    Raises ValueError when the final template pair misses the post-state
    steady syndromes by more than `settle_tol` (resonator too slow for
    the template length).
    """
    times = np.arange(n_steps) * dt
    # Only four distinct channel sweeps exist: +->-, -->+, flat at +, flat at -.
    sweeps = {
        (+1.0, -1.0): _channel_sweep(+1.0, -1.0, times, params),
        (-1.0, +1.0): _channel_sweep(-1.0, +1.0, times, params),
        (+1.0, +1.0): np.full(n_steps, +1.0),
        (-1.0, -1.0): np.full(n_steps, -1.0),
    }
    templates = {}
    for pre in range(N_STATES):
        for mask in QUBIT_MASKS:
            post = pre ^ mask
            means = np.stack(
                [sweeps[(SYNDROME_TABLE[pre, k], SYNDROME_TABLE[post, k])]
                 for k in (0, 1)],
                axis=1,
            )
            err = np.abs(means[-1] - SYNDROME_TABLE[post]).max()
            if err > settle_tol:
                raise ValueError(
                    f"template {pre}->{post} ends {err:.3f} away from the "
                    f"steady syndromes; increase kappa or the template length"
                )
            templates[(pre, post)] = TransientTemplate(pre, post, means)
    return templates


def template_table(templates: dict[tuple[int, int], TransientTemplate],
                   n_steps: int = TEMPLATE_STEPS) -> np.ndarray:
    """Dense (64, n_steps, 2) lookup keyed by pre*8 + post.

    Transitions without a template (identity and multi-flip jumps) fall
    back to a flat row at the post-state steady syndromes, so engine
    lookups are valid for any observed transition.
    """
    table = np.empty((N_STATES * N_STATES, n_steps, 2))
    for pre in range(N_STATES):
        for post in range(N_STATES):
            table[pre * N_STATES + post] = SYNDROME_TABLE[post]
    for (pre, post), tpl in templates.items():
        if tpl.means.shape != (n_steps, 2):
            raise ValueError("template length does not match the table size")
        table[pre * N_STATES + post] = tpl.means
    return table
