"""Agents A and B scattering a photon in an order controlled by the path of A."""

import cmath
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, fields
from enum import IntEnum, StrEnum
from typing import Any, NamedTuple, Self

import numpy as np
import polars as pl

from qswitch.error import ConfigError, DomainError
from qswitch.hilbert import (
    NORM_TOL,
    Factor,
    SparseOperator,
    StateVector,
    apply,
    basis_state,
    contract,
    measure_in_basis,
    product_state,
    project,
    superpose,
)

logger = logging.getLogger(__name__)

N_PHOTONS = 5


class Order(IntEnum):
    A_BEFORE_B = 0
    B_BEFORE_A = 1


class OrderContext(StrEnum):
    FIRST = "first"
    SECOND = "second"


class DiagonalBasis(StrEnum):
    AGENTS = "agents"
    PATH = "path"


# detector pattern (detA, detB) per postselection; 1 means the witness photon was emitted
ZETA_PATTERNS: dict[int, tuple[int, int]] = {0: (1, 1), 1: (1, 0), 2: (0, 1), 3: (0, 0)}
# no witness photon: both agents scattered the target
SWITCH_ZETA = 3


class Transition(NamedTuple):
    agent: str
    absorbed: int
    excited: int
    final: int
    emitted: int


# Agent levels are A0..A5 and B1..B5; photons e1..e7, e6 and e7 being the witnesses.
TRANSITIONS: tuple[Transition, ...] = (
    Transition("A", absorbed=1, excited=2, final=3, emitted=2),
    Transition("A", absorbed=4, excited=4, final=5, emitted=5),
    Transition("B", absorbed=1, excited=2, final=3, emitted=4),
    Transition("B", absorbed=2, excited=4, final=5, emitted=3),
)
WITNESS: dict[str, Transition] = {
    "A": Transition("A", absorbed=0, excited=1, final=5, emitted=6),
    "B": Transition("B", absorbed=0, excited=1, final=5, emitted=7),
}
READY_LEVEL = 1


def energy_level_table() -> pl.DataFrame:
    rows = [*TRANSITIONS, *WITNESS.values()]
    return pl.DataFrame(
        {
            "agent": [t.agent for t in rows],
            "absorbed": [f"e{t.absorbed}" if t.absorbed else "-" for t in rows],
            "path": [f"{t.agent}{READY_LEVEL}->{t.agent}{t.excited}->{t.agent}{t.final}" if t.absorbed else f"{t.agent}{READY_LEVEL}->{t.agent}{t.final}" for t in rows],
            "emitted": [f"e{t.emitted}" for t in rows],
        },
    )


def _level(agent: str, i: int) -> int:
    return i if agent == "A" else i - 1


def _photon(i: int) -> int:
    return i - 1


def _complement(c: complex, phase: float) -> complex:
    return cmath.exp(1j * phase) * math.sqrt(max(0.0, 1.0 - abs(c) ** 2))


@dataclass(frozen=True)
class AmplitudeModel:
    """Absorption amplitudes of the agents.

    Resonant channels: c1A (e1), c4A (e4), c1B (e1), c2B (e2). A second scattering of a photon
    already re-emitted by the other agent has amplitude f_BA (A then B) or f_AB (B then A).
    The non-absorption amplitudes carry the phases delta_* and gamma_*; photons an agent cannot
    absorb pick up its non-resonant phase delta_A or delta_B.
    """

    c1A: complex = 1.0  # noqa: N815
    c4A: complex = 1.0  # noqa: N815
    c1B: complex = 1.0  # noqa: N815
    c2B: complex = 1.0  # noqa: N815
    f_BA: complex = 1.0  # noqa: N815
    f_AB: complex = 1.0  # noqa: N815
    delta_1A: float = 0.0  # noqa: N815
    delta_4A: float = 0.0  # noqa: N815
    delta_1B: float = 0.0  # noqa: N815
    delta_2B: float = 0.0  # noqa: N815
    delta_A: float = 0.0  # noqa: N815
    delta_B: float = 0.0  # noqa: N815
    gamma_BA: float = 0.0  # noqa: N815
    gamma_AB: float = 0.0  # noqa: N815

    def __post_init__(self: Self) -> None:
        for name in ("c1A", "c4A", "c1B", "c2B", "f_BA", "f_AB"):
            v = complex(getattr(self, name))
            if abs(v) > 1.0 + NORM_TOL:
                err = f"amplitude {name} has modulus {abs(v):.15g} > 1"
                raise DomainError(err)
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, complex | float | int) and not cmath.isfinite(complex(v)):
                err = f"amplitude parameter {f.name} is not finite"
                raise DomainError(err)

    @classmethod
    def from_mapping(cls: type[Self], values: dict[str, Any]) -> Self:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            err = f"unknown model parameter(s): {', '.join(unknown)}"
            raise ConfigError(err)
        return cls(**{k: parse_complex(k, v) if k.startswith(("c", "f_")) else float(v) for k, v in values.items()})

    def absorption(self: Self, agent: str, photon: int) -> complex:
        return complex({("A", 1): self.c1A, ("A", 4): self.c4A, ("B", 1): self.c1B, ("B", 2): self.c2B}.get((agent, photon), 0.0))

    def transmission(self: Self, agent: str, photon: int) -> complex:
        phases = {("A", 1): self.delta_1A, ("A", 4): self.delta_4A, ("B", 1): self.delta_1B, ("B", 2): self.delta_2B}
        default = self.delta_A if agent == "A" else self.delta_B
        return _complement(self.absorption(agent, photon), phases.get((agent, photon), default))

    @property
    def d1A(self: Self) -> complex:  # noqa: N802
        return self.transmission("A", 1)

    @property
    def d4A(self: Self) -> complex:  # noqa: N802
        return self.transmission("A", 4)

    @property
    def d1B(self: Self) -> complex:  # noqa: N802
        return self.transmission("B", 1)

    @property
    def d2B(self: Self) -> complex:  # noqa: N802
        return self.transmission("B", 2)

    @property
    def g_BA(self: Self) -> complex:  # noqa: N802
        return _complement(self.f_BA, self.gamma_BA)

    @property
    def g_AB(self: Self) -> complex:  # noqa: N802
        return _complement(self.f_AB, self.gamma_AB)

    def second_scattering(self: Self, agent: str) -> tuple[complex, complex]:
        return (self.f_AB, self.g_AB) if agent == "A" else (self.f_BA, self.g_BA)


def parse_complex(name: str, v: Any) -> complex:  # noqa: ANN401
    match v:
        case int() | float() | complex():
            return complex(v)
        case [re, im]:
            return complex(float(re), float(im))
        case {"re": re, "im": im}:
            return complex(float(re), float(im))
        case str():
            try:
                return complex(v.replace(" ", ""))
            except ValueError as e:
                err = f"cannot parse amplitude {name} = {v!r}"
                raise ConfigError(err) from e
        case _:
            err = f"cannot parse amplitude {name} = {v!r}"
            raise ConfigError(err)


def _other(agent: str) -> str:
    return "B" if agent == "A" else "A"


def _interaction(model: AmplitudeModel, agent: str, context: OrderContext) -> SparseOperator:
    own = Factor.AGENT_A if agent == "A" else Factor.AGENT_B
    det = Factor.DET_A if agent == "A" else Factor.DET_B
    other = Factor.AGENT_B if agent == "A" else Factor.AGENT_A
    witness = WITNESS[agent]
    resonant = {t.absorbed: t for t in TRANSITIONS if t.agent == agent}
    # the other agent's transition that re-emits a photon this agent absorbs
    feeding = {t.emitted: t for t in TRANSITIONS if t.agent == _other(agent) and t.emitted in resonant}

    factors = [own, other, Factor.TARGET, det] if context == OrderContext.SECOND else [own, Factor.TARGET, det]
    factors.sort(key=lambda f: list(Factor).index(f))

    def idx(level: int, photon: int, flag: int, other_level: int | None) -> list[int]:
        values = {own: _level(agent, level), Factor.TARGET: _photon(photon), det: flag}
        if other_level is not None:
            values[other] = other_level
        return [values[f] for f in factors]

    other_levels: Sequence[int | None] = list(range(other.dim)) if context == OrderContext.SECOND else [None]
    entries: list[tuple[Sequence[int], Sequence[int], complex]] = []
    for o in other_levels:
        for photon in range(1, N_PHOTONS + 1):
            src = idx(READY_LEVEL, photon, 0, o)
            t = resonant.get(photon)
            if t is None:
                entries.append((src, idx(witness.final, photon, 1, o), model.transmission(agent, photon)))
                continue
            hit, miss = model.absorption(agent, photon), model.transmission(agent, photon)
            fed = feeding.get(photon)
            if o is not None and fed is not None and o == _level(fed.agent, fed.final):
                hit, miss = model.second_scattering(agent)
            entries.append((src, idx(t.final, t.emitted, 0, o), hit))
            entries.append((src, idx(witness.final, photon, 1, o), miss))
    return SparseOperator(entries, factors=factors, passthrough=True)


def interaction_A(model: AmplitudeModel, context: OrderContext = OrderContext.FIRST) -> SparseOperator:  # noqa: N802
    """U_A on agentA ⊗ target ⊗ detA, or with agentB as well when A acts second."""
    return _interaction(model, "A", context)


def interaction_B(model: AmplitudeModel, context: OrderContext = OrderContext.FIRST) -> SparseOperator:  # noqa: N802
    return _interaction(model, "B", context)


def _check_alpha(alpha: Sequence[complex]) -> np.ndarray:
    a = np.asarray(alpha, dtype=np.complex128)
    if a.shape != (N_PHOTONS,):
        err = f"expected {N_PHOTONS} photon amplitudes, got shape {a.shape}"
        raise DomainError(err)
    norm = float(np.linalg.norm(a))
    if abs(norm - 1.0) > NORM_TOL:
        err = f"photon amplitudes are not normalized (norm {norm:.15g})"
        raise DomainError(err)
    return a


def build_input(alpha: Sequence[complex]) -> StateVector:
    a = _check_alpha(alpha)
    path = superpose(
        [(1 / math.sqrt(2), basis_state({Factor.PATH: o}, factors=[Factor.PATH])) for o in Order],
    )
    agents = basis_state({Factor.AGENT_A: _level("A", READY_LEVEL), Factor.AGENT_B: _level("B", READY_LEVEL)}, factors=[Factor.AGENT_A, Factor.AGENT_B])
    target = StateVector(a, factors=[Factor.TARGET])
    detectors = basis_state({Factor.DET_A: 0, Factor.DET_B: 0}, factors=[Factor.DET_A, Factor.DET_B])
    return product_state(path, agents, target, detectors)


def switch_operators(model: AmplitudeModel) -> list[SparseOperator]:
    """The path-controlled interactions, in the order they act."""
    return [
        SparseOperator.controlled(Factor.PATH, Order.A_BEFORE_B, interaction_A(model, OrderContext.FIRST)),
        SparseOperator.controlled(Factor.PATH, Order.B_BEFORE_A, interaction_B(model, OrderContext.FIRST)),
        SparseOperator.controlled(Factor.PATH, Order.A_BEFORE_B, interaction_B(model, OrderContext.SECOND)),
        SparseOperator.controlled(Factor.PATH, Order.B_BEFORE_A, interaction_A(model, OrderContext.SECOND)),
    ]


class DiagonalOutcome(NamedTuple):
    sign: int
    probability: float
    residual: StateVector


@dataclass(frozen=True)
class SwitchOutcome:
    state: StateVector
    model: AmplitudeModel
    alpha: tuple[complex, ...]

    def branch(self: Self, order: Order) -> StateVector:
        """Agents ⊗ target ⊗ detectors state produced by one ordering, without the path label."""
        label = basis_state({Factor.PATH: order}, factors=[Factor.PATH])
        return contract(label, self.state) * math.sqrt(2)

    def probabilities(self: Self) -> dict[int, float]:
        return {z: postselect(self, z)[1] for z in ZETA_PATTERNS}

    def table(self: Self, basis: DiagonalBasis = DiagonalBasis.AGENTS) -> pl.DataFrame:
        rows: dict[str, list[Any]] = {"zeta": [], "detA": [], "detB": [], "probability": [], "sign": [], "p_sign": []}
        amps: dict[str, list[float]] = {f"{lbl}.{part}": [] for lbl in Factor.TARGET.labels for part in ("re", "im")}
        for zeta, (da, db) in ZETA_PATTERNS.items():
            post, p = postselect(self, zeta)
            outcomes = diagonal_measure(post, basis) if p > 0.0 else [DiagonalOutcome(s, 0.0, StateVector.zeros([Factor.TARGET])) for s in (1, -1)]
            for o in outcomes:
                rows["zeta"].append(zeta)
                rows["detA"].append(da)
                rows["detB"].append(db)
                rows["probability"].append(p)
                rows["sign"].append(o.sign)
                rows["p_sign"].append(o.probability)
                target = _target_amplitudes(o.residual)
                for k, lbl in enumerate(Factor.TARGET.labels):
                    amps[f"{lbl}.re"].append(float(target[k].real))
                    amps[f"{lbl}.im"].append(float(target[k].imag))
        return pl.DataFrame({**rows, **amps})


def _target_amplitudes(residual: StateVector) -> np.ndarray:
    if residual.factors == (Factor.TARGET,):
        return residual.amplitudes
    # path basis: report the target marginal amplitudes only when agents factor out
    t = np.moveaxis(residual.tensor(), residual.factors.index(Factor.TARGET), -1).reshape(-1, Factor.TARGET.dim)
    nz = np.flatnonzero(np.linalg.norm(t, axis=1) > NORM_TOL)
    if nz.size == 1:
        row = t[nz[0]]
        return row / np.linalg.norm(row)
    return np.full(Factor.TARGET.dim, np.nan, dtype=np.complex128)


def run_switch(alpha: Sequence[complex], model: AmplitudeModel) -> SwitchOutcome:
    state = build_input(alpha)
    for op in switch_operators(model):
        state = apply(op, state)
    if abs(state.norm - 1.0) > 1e-12:
        logger.warning("switch output norm deviates from 1 by %.3g", state.norm - 1.0)
    logger.debug("switch run alpha=%s norm=%.17g", list(alpha), state.norm)
    return SwitchOutcome(state=state, model=model, alpha=tuple(complex(a) for a in alpha))


def postselect(outcome: SwitchOutcome, zeta: int) -> tuple[StateVector, float]:
    """Project the detectors on the pattern of ``zeta``; returns the normalized path ⊗ agents ⊗ target state."""
    if zeta not in ZETA_PATTERNS:
        err = f"postselection must be one of 0, 1, 2, 3, got {zeta}"
        raise DomainError(err)
    da, db = ZETA_PATTERNS[zeta]
    _, p = project(outcome.state, {Factor.DET_A: da, Factor.DET_B: db})
    detectors = basis_state({Factor.DET_A: da, Factor.DET_B: db}, factors=[Factor.DET_A, Factor.DET_B])
    residual = contract(detectors, outcome.state)
    if p == 0.0:
        logger.warning("postselection zeta=%d has probability zero", zeta)
        return residual, 0.0
    return residual.normalized(), p


def diagonal_basis(basis: DiagonalBasis = DiagonalBasis.AGENTS) -> list[StateVector]:
    """|F_A<B> ± |F_B<A>, with F_A<B = |A<B>|A3>|B5> and F_B<A = |B<A>|A5>|B3>; or |A<B> ± |B<A>."""
    s = 1 / math.sqrt(2)
    match basis:
        case DiagonalBasis.AGENTS:
            fs = [Factor.PATH, Factor.AGENT_A, Factor.AGENT_B]
            first = basis_state({Factor.PATH: Order.A_BEFORE_B, Factor.AGENT_A: _level("A", 3), Factor.AGENT_B: _level("B", 5)}, factors=fs)
            second = basis_state({Factor.PATH: Order.B_BEFORE_A, Factor.AGENT_A: _level("A", 5), Factor.AGENT_B: _level("B", 3)}, factors=fs)
        case DiagonalBasis.PATH:
            first = basis_state({Factor.PATH: Order.A_BEFORE_B}, factors=[Factor.PATH])
            second = basis_state({Factor.PATH: Order.B_BEFORE_A}, factors=[Factor.PATH])
    return [superpose([(s, first), (s, second)]), superpose([(s, first), (-s, second)])]


def diagonal_measure(state: StateVector, basis: DiagonalBasis = DiagonalBasis.AGENTS) -> list[DiagonalOutcome]:
    """Measure the ordering degrees of freedom in the ± basis of ``basis``; residuals are normalized."""
    out = []
    for sign, b in zip((1, -1), diagonal_basis(basis), strict=True):
        p, _ = measure_in_basis(state, [b])[0]
        residual = contract(b, state).normalized()
        out.append(DiagonalOutcome(sign, p, residual))
    return out


@dataclass(frozen=True)
class TargetSwitch:
    plus: StateVector
    minus: StateVector
    p_plus: float
    p_minus: float


def target_operators() -> tuple[np.ndarray, np.ndarray]:
    """A_targ and B_targ on the photon alone: each resonant photon is replaced by its re-emission."""
    ops = {}
    for agent in ("A", "B"):
        m = np.eye(N_PHOTONS, dtype=np.complex128)
        for t in TRANSITIONS:
            if t.agent == agent:
                m[:, _photon(t.absorbed)] = 0.0
                m[_photon(t.emitted), _photon(t.absorbed)] = 1.0
        ops[agent] = m
    return ops["A"], ops["B"]


def target_switch(alpha: Sequence[complex]) -> TargetSwitch:
    a = _check_alpha(alpha)
    a_op, b_op = target_operators()
    ba, ab = b_op @ a_op @ a, a_op @ b_op @ a
    plus = StateVector(ba + ab, factors=[Factor.TARGET])
    minus = StateVector(ba - ab, factors=[Factor.TARGET])
    total = plus.norm**2 + minus.norm**2
    if total == 0.0:
        err = "both orderings annihilate the photon state"
        raise DomainError(err)
    return TargetSwitch(plus=plus.normalized(), minus=minus.normalized(), p_plus=plus.norm**2 / total, p_minus=minus.norm**2 / total)
