"""Lindblad models for autonomous repetition-code stabilisation.

Each builder returns a :class:`LindbladModel` for one correction scheme at one
level of approximation:

* ``build_effective_3q`` -- fully reduced 3-qubit model: the engineered
  reservoir appears only through correction dissipators at rate
  ``gamma_c = omega_p**2 / kappa``.
* ``build_tierB_3q`` -- qubits plus lossy cavities, with the engineered
  coupling reduced to resonant excitation conversion; adiabatic elimination
  of the cavities recovers the effective model.
* ``build_tierC_3q`` -- dispersive level: number-dependent qubit shifts select
  the wanted conversion processes by resonance, everything else is detuned.
* ``build_single_cavity_3q`` -- one correction channel plus a circulation
  Hamiltonian that transports errors to the corrected qubit.
* ``build_star_effective`` / ``build_star_multiplexed`` -- the 9-qubit star:
  three outer 3-qubit blocks each sharing their first qubit with a central
  block, corrected concurrently or in alternating time windows.

Conventions: qubit labels ``q1..q3`` (star: ``q11..q33``, block-major, shared
qubits ``qi1``), cavity labels ``a1..a3``; in composite spaces qubits come
first.  Correction operators flip one qubit toward the agreement of its two
partners: ``sigma^- P(partners=00) + sigma^+ P(partners=11)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .hilbert import (
    Operator,
    TensorSpace,
    annihilator,
    embed,
    make_space,
    pauli,
    projector,
)

__all__ = [
    "Params",
    "ConstantProfile",
    "AlternatingProfile",
    "CONSTANT",
    "Channel",
    "LindbladModel",
    "gamma_c",
    "validate_timescales",
    "chi_couplings",
    "build_effective_3q",
    "build_tierB_3q",
    "build_tierC_3q",
    "build_single_cavity_3q",
    "build_star_effective",
    "build_star_multiplexed",
    "build_unprotected_qubit",
]

# a << b is accepted when b/a >= this ratio
TIMESCALE_RATIO = 5.0


@dataclass(frozen=True)
class Params:
    """Physical rates of the schemes (all in units of one reference rate).

    Attributes:
        gamma: bit-flip rate of the noise to be corrected.
        kappa: cavity photon decay rate.
        omega_p: engineered conversion (pump) Rabi rate.
        chi: magnitude of the strongest dispersive coupling per cavity; the
            remaining two couplings are ``-chi/2`` each so the three couplings
            of every cavity sum to zero.
        j_circ: excitation-exchange rate of the single-cavity variant
            (default: ``omega_p``).
        gamma_c_outer: correction rate of the star's outer blocks
            (default: ``omega_p**2 / kappa``).
        gamma_c_central: correction rate of the star's central block
            (default: same as outer).
        switch_period: half-period of the time-multiplexed star (default:
            ``10 / gamma_c``, long enough for each phase to complete).
        cavity_dim: cavity truncation dimension (2 is faithful in the strong
            dissipation regime; raise it to probe truncation error).
    """

    gamma: float = 0.0
    kappa: float = 0.0
    omega_p: float = 0.0
    chi: float = 0.0
    j_circ: float | None = None
    gamma_c_outer: float | None = None
    gamma_c_central: float | None = None
    switch_period: float | None = None
    cavity_dim: int = 2

    def __post_init__(self) -> None:
        for name in ("gamma", "kappa", "omega_p", "chi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("j_circ", "gamma_c_outer", "gamma_c_central", "switch_period"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.cavity_dim < 2:
            raise ValueError("cavity_dim must be >= 2")


def gamma_c(params: Params) -> float:
    """Effective correction rate ``omega_p**2 / kappa``.

    Raises:
        ValueError: if kappa is zero (the rate is undefined without decay).
    """
    if params.kappa <= 0:
        raise ValueError("gamma_c requires kappa > 0")
    return params.omega_p**2 / params.kappa


def chi_couplings(params: Params) -> tuple[float, float, float]:
    """Dispersive couplings of each cavity to qubits (1, 2, 3); they sum to 0."""
    return (params.chi, -params.chi / 2.0, -params.chi / 2.0)


def validate_timescales(params: Params) -> list[str]:
    """Warn about violated rate orderings; never raises.

    The schemes assume gamma << kappa << chi and omega_p << chi for the
    resonance selection, plus omega_p < kappa for adiabatic elimination.
    Each ordering a << b is flagged when b/a < 5.  Zero rates are skipped so
    that reduced models (which do not carry every rate) validate cleanly.
    """
    warnings = []

    def check(small: float, big: float, label: str, ratio_name: str) -> None:
        if small > 0 and big > 0 and big / small < TIMESCALE_RATIO:
            warnings.append(
                f"{label} ({ratio_name} = {big / small:.3g} < {TIMESCALE_RATIO:g})"
            )

    check(params.gamma, params.kappa, "γ ≪ κ violated", "κ/γ")
    check(params.kappa, params.chi, "κ ≪ χ violated", "χ/κ")
    check(params.omega_p, params.chi, "Ω_p ≪ χ violated", "χ/Ω_p")
    check(params.omega_p, params.kappa, "Ω_p < κ marginal", "κ/Ω_p")
    return warnings


# ---------------------------------------------------------------------------
# time profiles

class ConstantProfile:
    """Always-on channel/Hamiltonian profile."""

    is_constant = True

    def value(self, t: float) -> float:
        return 1.0

    def switch_times(self, t0: float, t1: float) -> list[float]:
        return []

    def __repr__(self) -> str:
        return "ConstantProfile()"

    def __eq__(self, other) -> bool:
        return isinstance(other, ConstantProfile)

    def __hash__(self) -> int:
        return hash("ConstantProfile")


CONSTANT = ConstantProfile()


@dataclass(frozen=True)
class AlternatingProfile:
    """Square-wave gating with half-period ``period``.

    Active on windows ``[2k*T, (2k+1)*T)`` when ``active_first`` is true and
    on the complementary windows otherwise.
    """

    period: float
    active_first: bool = True

    is_constant = False

    def __post_init__(self) -> None:
        if self.period <= 0:
            raise ValueError("period must be > 0")

    def value(self, t: float) -> float:
        even_window = int(np.floor(t / self.period)) % 2 == 0
        return 1.0 if even_window == self.active_first else 0.0

    def switch_times(self, t0: float, t1: float) -> list[float]:
        """Window boundaries strictly inside (t0, t1)."""
        first = int(np.floor(t0 / self.period)) + 1
        times = []
        k = first
        while k * self.period < t1:
            t = k * self.period
            if t > t0:
                times.append(t)
            k += 1
        return times


# ---------------------------------------------------------------------------
# model container

@dataclass(frozen=True)
class Channel:
    """One dissipator: rate, jump operator and (optional) gating profile."""

    rate: float
    op: Operator
    profile: ConstantProfile | AlternatingProfile = CONSTANT
    kind: str = ""  # "correction" | "bitflip" | "cavity-decay"


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian terms plus dissipator channels on one tensor space.

    Hamiltonian terms are validated Hermitian at construction; all operators
    must live on ``space``.  Models are immutable and shareable.
    """

    space: TensorSpace
    hamiltonian_terms: tuple[tuple[Operator, ConstantProfile | AlternatingProfile], ...]
    channels: tuple[Channel, ...]
    scheme: str = ""
    tier: str = ""

    def __post_init__(self) -> None:
        for op, _profile in self.hamiltonian_terms:
            if op.space != self.space:
                raise ValueError("Hamiltonian term lives on a different space")
            if not op.is_hermitian():
                raise ValueError("Hamiltonian term is not Hermitian")
        for ch in self.channels:
            if ch.op.space != self.space:
                raise ValueError("jump operator lives on a different space")
            if ch.rate < 0:
                raise ValueError("channel rate must be >= 0")

    @property
    def is_time_independent(self) -> bool:
        return all(p.is_constant for _, p in self.hamiltonian_terms) and all(
            ch.profile.is_constant for ch in self.channels
        )

    def switch_times(self, t0: float, t1: float) -> list[float]:
        """Sorted union of all profile switching times inside (t0, t1)."""
        times: set[float] = set()
        for _, profile in self.hamiltonian_terms:
            times.update(profile.switch_times(t0, t1))
        for ch in self.channels:
            times.update(ch.profile.switch_times(t0, t1))
        return sorted(times)

    def max_rate(self) -> float:
        return max((ch.rate for ch in self.channels), default=0.0)


# ---------------------------------------------------------------------------
# operator helpers

def _qubit_space(n: int, prefix: str = "q") -> TensorSpace:
    return make_space([(f"{prefix}{i}", 2, "qubit") for i in range(1, n + 1)])


def correction_op(space: TensorSpace, flip_label: str, partner_labels: Sequence[str]) -> Operator:
    """Flip one qubit toward the agreement of its partners.

    Returns ``sigma^-_flip P(partners=0..0) + sigma^+_flip P(partners=1..1)``,
    which maps each computational basis state to at most one other basis
    state and annihilates states whose partners disagree.
    """
    down = embed(pauli("minus"), flip_label, space) @ projector(
        space, [(l, 0) for l in partner_labels]
    )
    up = embed(pauli("plus"), flip_label, space) @ projector(
        space, [(l, 1) for l in partner_labels]
    )
    return down + up


def _bitflip_channels(space: TensorSpace, labels: Sequence[str], rate: float) -> list[Channel]:
    return [
        Channel(rate, embed(pauli("x"), label, space), CONSTANT, kind="bitflip")
        for label in labels
    ]


def _correction_channels_3q(space: TensorSpace, rate: float) -> list[Channel]:
    labels = ("q1", "q2", "q3")
    channels = []
    for flip in labels:
        partners = tuple(l for l in labels if l != flip)
        channels.append(Channel(rate, correction_op(space, flip, partners), CONSTANT, kind="correction"))
    return channels


# ---------------------------------------------------------------------------
# three-qubit schemes

def build_effective_3q(params: Params) -> LindbladModel:
    """Fully reduced 3-qubit model: three correction dissipators plus noise.

    The correction operators restore any single flipped qubit to the value of
    the other two while acting coherently on the logical codespace, which they
    annihilate.
    """
    space = _qubit_space(3)
    rate = gamma_c(params)
    channels = _correction_channels_3q(space, rate)
    channels += _bitflip_channels(space, ("q1", "q2", "q3"), params.gamma)
    return LindbladModel(space, (), tuple(channels), scheme="effective3q", tier="A")


def _space_3q_3cav(cavity_dim: int) -> TensorSpace:
    factors = [(f"q{i}", 2, "qubit") for i in (1, 2, 3)]
    factors += [(f"a{i}", cavity_dim, "cavity") for i in (1, 2, 3)]
    return make_space(factors)


def build_tierB_3q(params: Params) -> LindbladModel:
    """Conversion-level model: qubits plus lossy cavities.

    Each cavity exchanges excitations with its conditional qubit flip at Rabi
    rate ``omega_p/2``; eliminating the kappa-damped cavities adiabatically
    yields correction at exactly ``omega_p**2 / kappa``.
    """
    space = _space_3q_3cav(params.cavity_dim)
    qlabels = ("q1", "q2", "q3")
    a_op = annihilator(params.cavity_dim)

    h = None
    for i, flip in enumerate(qlabels):
        partners = tuple(l for l in qlabels if l != flip)
        c_i = correction_op(space, flip, partners)
        a_i = embed(a_op, f"a{i + 1}", space)
        term = (params.omega_p / 2.0) * (a_i.dag() @ c_i + a_i @ c_i.dag())
        h = term if h is None else h + term

    channels = [
        Channel(params.kappa, embed(a_op, f"a{i}", space), CONSTANT, kind="cavity-decay")
        for i in (1, 2, 3)
    ]
    channels += _bitflip_channels(space, qlabels, params.gamma)
    return LindbladModel(space, ((h, CONSTANT),), tuple(channels), scheme="tierB3q", tier="B")


def build_tierC_3q(params: Params) -> LindbladModel:
    """Dispersive-level model: resonance selection instead of built-in
    conditioning.

    The Hamiltonian is the photon-number-dependent qubit shift plus bare
    excitation conversion on every cavity/qubit pair::

        H = sum_k n_k (sum_j chi_j sigma^z_j) / 2
          + (omega_p / 2) sum_k (a_k + a_k^dag) sigma^x_k

    With couplings (chi, -chi/2, -chi/2) the conversions that implement the
    wanted correction create a photon at zero dispersive shift (the couplings
    sum to zero on agreeing partners), while every unwanted conversion is
    detuned by at least chi/2 and is suppressed once chi >> omega_p.
    """
    space = _space_3q_3cav(params.cavity_dim)
    qlabels = ("q1", "q2", "q3")
    a_op = annihilator(params.cavity_dim)
    n_op = a_op.conj().T @ a_op
    chis = chi_couplings(params)

    h = None
    for k in (1, 2, 3):
        n_k = embed(n_op, f"a{k}", space)
        shift = None
        for j, chi_j in zip((1, 2, 3), chis):
            term = (chi_j / 2.0) * embed(pauli("z"), f"q{j}", space)
            shift = term if shift is None else shift + term
        x_k = embed(pauli("x"), f"q{k}", space)
        a_k = embed(a_op, f"a{k}", space)
        term = n_k @ shift + (params.omega_p / 2.0) * ((a_k + a_k.dag()) @ x_k)
        h = term if h is None else h + term

    channels = [
        Channel(params.kappa, embed(a_op, f"a{i}", space), CONSTANT, kind="cavity-decay")
        for i in (1, 2, 3)
    ]
    channels += _bitflip_channels(space, qlabels, params.gamma)
    return LindbladModel(space, ((h, CONSTANT),), tuple(channels), scheme="tierC3q", tier="C")


def build_single_cavity_3q(params: Params) -> LindbladModel:
    """Single-channel variant: correct qubit 1 only, circulate errors to it.

    A nearest-neighbour excitation exchange at rate ``j_circ`` transports
    single-qubit errors onto qubit 1 where the one correction channel removes
    them.  ``j_circ`` defaults to ``omega_p``.
    """
    j = params.j_circ if params.j_circ is not None else params.omega_p
    space = _qubit_space(3)
    rate = gamma_c(params)

    c_1 = correction_op(space, "q1", ("q2", "q3"))
    hop_12 = embed(pauli("plus"), "q1", space) @ embed(pauli("minus"), "q2", space)
    hop_23 = embed(pauli("plus"), "q2", space) @ embed(pauli("minus"), "q3", space)
    h_circ = (j / 2.0) * (hop_12 + hop_23 + hop_12.dag() + hop_23.dag())

    channels = [Channel(rate, c_1, CONSTANT, kind="correction")]
    channels += _bitflip_channels(space, ("q1", "q2", "q3"), params.gamma)
    return LindbladModel(
        space, ((h_circ, CONSTANT),), tuple(channels), scheme="singleCavity3q", tier="A"
    )


def build_unprotected_qubit(params: Params) -> LindbladModel:
    """Reference model: one qubit exposed to the bit-flip noise, no correction."""
    space = _qubit_space(1)
    channels = _bitflip_channels(space, ("q1",), params.gamma)
    return LindbladModel(space, (), tuple(channels), scheme="unprotectedQubit", tier="A")


# ---------------------------------------------------------------------------
# nine-qubit star

STAR_BLOCKS = (1, 2, 3)
STAR_POSITIONS = (1, 2, 3)


def star_qubit_label(block: int, position: int) -> str:
    """Label of star qubit (block, position); position 1 is the shared qubit."""
    return f"q{block}{position}"


def _star_space() -> TensorSpace:
    labels = [
        (star_qubit_label(i, j), 2, "qubit")
        for i in STAR_BLOCKS
        for j in STAR_POSITIONS
    ]
    return make_space(labels)


def _star_rates(params: Params) -> tuple[float, float]:
    outer = params.gamma_c_outer
    if outer is None:
        outer = gamma_c(params)
    central = params.gamma_c_central
    if central is None:
        central = outer
    return outer, central


def _star_correction_channels(
    space: TensorSpace, outer_rate: float, central_rate: float,
    outer_profile=CONSTANT, central_profile=CONSTANT,
) -> list[Channel]:
    channels = []
    for i in STAR_BLOCKS:
        for j in STAR_POSITIONS:
            flip = star_qubit_label(i, j)
            partners = tuple(star_qubit_label(i, k) for k in STAR_POSITIONS if k != j)
            channels.append(
                Channel(outer_rate, correction_op(space, flip, partners),
                        outer_profile, kind="correction")
            )
    # central block acts on the three shared qubits (position 1 of each block)
    shared = tuple(star_qubit_label(i, 1) for i in STAR_BLOCKS)
    for j, flip in enumerate(shared):
        partners = tuple(l for l in shared if l != flip)
        channels.append(
            Channel(central_rate, correction_op(space, flip, partners),
                    central_profile, kind="correction")
        )
    return channels


def build_star_effective(params: Params) -> LindbladModel:
    """Nine-qubit star at the reduced level: 12 correction channels.

    Outer blocks correct internally toward their local agreement; the central
    block does the same on the three shared qubits, propagating consensus
    between blocks.
    """
    space = _star_space()
    outer, central = _star_rates(params)
    channels = _star_correction_channels(space, outer, central)
    channels += _bitflip_channels(space, space.labels, params.gamma)
    return LindbladModel(space, (), tuple(channels), scheme="starEffective", tier="A")


def build_star_multiplexed(params: Params) -> LindbladModel:
    """Star variant with outer and central corrections alternating in time.

    Outer channels are active on windows ``[2kT, (2k+1)T)`` and central ones
    on the complementary windows, so concurrent outer/central activity never
    overlaps; bit flips stay on throughout.  ``T`` defaults to ``10/gamma_c``
    using the slower of the two correction rates.
    """
    space = _star_space()
    outer, central = _star_rates(params)
    period = params.switch_period
    if period is None:
        slowest = min(r for r in (outer, central) if r > 0) if max(outer, central) > 0 else 0.0
        if slowest <= 0:
            raise ValueError("switch_period or positive correction rates required")
        period = 10.0 / slowest
    if period <= 0:
        raise ValueError("switch_period must be > 0")
    channels = _star_correction_channels(
        space, outer, central,
        outer_profile=AlternatingProfile(period, active_first=True),
        central_profile=AlternatingProfile(period, active_first=False),
    )
    channels += _bitflip_channels(space, space.labels, params.gamma)
    return LindbladModel(space, (), tuple(channels), scheme="starMultiplexed", tier="A")
