"""Harvested RF power, consumed system power and the HPE ratio."""

from dataclasses import dataclass, field

import numpy as np

from .geometry import channel as build_channel

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class PowerConfig:
    """Scalar power-consumption constants of the XL-MIMO system.

    varsigma : power-amplifier efficiency, in (0, 1]
    p_et : per-element transmit power cap [W]
    p_syn : per-sub-array frequency-synthesizer power [W]
    p_ct : per-RF-chain circuit power [W]
    p_cr : per-user receiver circuit power [W]
    """

    varsigma: float = 0.35
    p_et: float = 0.05
    p_syn: float = 0.05
    p_ct: float = 0.0482
    p_cr: float = 0.0625

    def __post_init__(self):
        if not 0 < self.varsigma <= 1:
            raise ValueError("varsigma must lie in (0, 1]")
        for name in ("p_et", "p_syn", "p_ct", "p_cr"):
            if getattr(self, name) < 0:
                raise ValueError("%s must be >= 0" % name)

    def p_sub(self, n_elements):
        """Per-sub-array transmit power budget P_s = Ns * P_et."""
        return n_elements * self.p_et

    def p_total(self, n_sub, n_elements):
        """Combined transmit power budget P_t = S * P_s."""
        return n_sub * self.p_sub(n_elements)


@dataclass
class AllocationState:
    """Power coefficients with binary and parameterized activations."""

    omega: np.ndarray          # (S, M) power coefficients [W]
    a: np.ndarray              # (S,) binary activations
    a_tilde: np.ndarray        # (S,) parameterized activations in [0, 1]

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.a = np.asarray(self.a, dtype=int)
        self.a_tilde = np.asarray(self.a_tilde, dtype=float)
        if self.omega.ndim != 2:
            raise ValueError("omega must be an (S, M) matrix")
        if self.a.shape != (self.omega.shape[0],) or self.a_tilde.shape != self.a.shape:
            raise ValueError("activation vectors must have length S")
        # inactive sub-arrays hold no power and no fractional weight
        off = self.a == 0
        self.omega[off, :] = 0.0
        self.a_tilde[off] = 0.0

    def validate(self, power_cfg, n_elements):
        if np.any(self.omega < -FEASIBILITY_TOL):
            raise ValueError("omega must be elementwise non-negative")
        p_sub = power_cfg.p_sub(n_elements)
        row = self.omega.sum(axis=1)
        if np.any(row > p_sub + FEASIBILITY_TOL):
            raise ValueError("per-sub-array power constraint violated")
        total = float((self.a * row).sum())
        if total > power_cfg.p_total(len(self.a), n_elements) + FEASIBILITY_TOL:
            raise ValueError("total power constraint violated")

    def weights(self, use_parameterized):
        return self.a_tilde if use_parameterized else self.a.astype(float)


def _coherent_user_sums(ch, omega, weights):
    """Complex coherent sums T[k, m] = sum_s w_s kappa_{s,m} sqrt(O_{s,m}) g_{s,k}^T g_{s,m}^*."""
    coef = weights[:, None] * ch.kappa * np.sqrt(np.maximum(omega, 0.0))
    return np.einsum("sm,skm->km", coef, ch.gram)


def received_power_per_user(ch, alloc, use_parameterized=False):
    """Harvested RF power at each receiving user [W]."""
    t = _coherent_user_sums(ch, alloc.omega, alloc.weights(use_parameterized))
    return np.sum(np.abs(t) ** 2, axis=1)


def harvested_power(ch, alloc, use_parameterized=False):
    """Total RF power collected by all users for the given allocation [W].

    Uses the coherent inner-sum form (O(S M^2)); the expanded double-sum over
    sub-array pairs is algebraically identical and serves as a test oracle.
    """
    if alloc.omega.shape != (ch.n_sub, ch.n_users):
        raise ValueError("allocation dimensions do not match the channel set")
    return float(np.sum(received_power_per_user(ch, alloc, use_parameterized)))


def consumed_power(alloc, power_cfg, n_users, n_elements, use_parameterized=False):
    """Total power drawn by the system for the given allocation [W]."""
    w = alloc.weights(use_parameterized)
    row = alloc.omega.sum(axis=1)
    bracket = row / power_cfg.varsigma + 2.0 * power_cfg.p_syn + n_elements * power_cfg.p_ct
    return float(np.dot(w, bracket) + n_users * power_cfg.p_cr)


def hpe(ch, alloc, power_cfg, use_parameterized=False):
    """Harvested-power efficiency: harvested over consumed power."""
    pc = consumed_power(alloc, power_cfg, ch.n_users, ch.n_elements,
                        use_parameterized)
    if pc <= 0:
        raise ValueError("consumed power must be positive to form the HPE ratio")
    return harvested_power(ch, alloc, use_parameterized) / pc


def power_map(geom, alloc, ch, probes, use_parameterized=False,
              amplitude_model="center"):
    """Harvested power a virtual probe user would collect at each location.

    The precoders and power coefficients stay fixed at the values designed
    for the real users; only the receive channel is re-synthesized per probe.
    """
    w = alloc.weights(use_parameterized)
    coef = w[:, None] * ch.kappa * np.sqrt(np.maximum(alloc.omega, 0.0))
    values = np.zeros(len(probes))
    for i, p in enumerate(probes):
        p = np.asarray(p, dtype=float)
        if p[2] <= 0:
            # behind the array plane: outside the element pattern support
            continue
        gq = np.stack([build_channel(geom, s, p, amplitude_model)
                       for s in range(geom.n_sub)])
        cross = np.einsum("si,smi->sm", gq, np.conj(ch.g))
        t = np.sum(coef * cross, axis=0)
        values[i] = np.sum(np.abs(t) ** 2)
    return values
