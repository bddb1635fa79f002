"""Agent types, round-state sampling and the vote rules of the voting model.

A voting round samples three post properties ``p1`` (quality), ``p2`` and
``p3``, a competence on ``p1`` for every agent, each agent's beliefs, and a
private property for every lone wolf.  Each agent type then maps its beliefs
to a vote in ``{+1, -1}``.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

UP = 1
DOWN = -1

COMPETENCE_RANGE = (0.65, 0.95)


class AgentType(enum.Enum):
    """The ten behaviour-defining agent types.

    Values are the ASCII tags used in files and on the command line.
    """

    A = "A"
    B_UP = "B_up"
    B_DOWN = "B_down"
    B_BOTH = "B_both"
    D_UP = "D_up"
    D_DOWN = "D_down"
    D_BOTH = "D_both"
    L_UP = "L_up"
    L_DOWN = "L_down"
    L_BOTH = "L_both"

    @property
    def authentic(self) -> bool:
        return self is AgentType.A

    @property
    def family(self) -> str:
        """``"A"``, ``"B"`` (booster), ``"D"`` (distorter) or ``"L"`` (lone wolf)."""
        return self.value[0]

    @property
    def direction(self) -> str | None:
        """``"up"``, ``"down"``, ``"both"``, or ``None`` for authentic agents."""
        return None if self is AgentType.A else self.value.split("_")[1]

    @property
    def symbol(self) -> str:
        arrows = {"up": "↑", "down": "↓", "both": "↕"}
        return self.value if self is AgentType.A else self.family + arrows[self.direction]

    @classmethod
    def parse(cls, text: str) -> "AgentType":
        """Accept tags (``B_up``), symbols (``B↑``) or enum names (``B_UP``)."""
        for t in cls:
            if text in (t.value, t.name, t.symbol):
                return t
        raise ValueError(f"unknown agent type {text!r}")


TYPE_ORDER: tuple[AgentType, ...] = tuple(AgentType)
INAUTHENTIC_TYPES: tuple[AgentType, ...] = TYPE_ORDER[1:]
LONE_WOLVES = frozenset({AgentType.L_UP, AgentType.L_DOWN, AgentType.L_BOTH})


@dataclass(frozen=True)
class Population:
    """Assignment of agent ids ``0..n-1`` to agent types.

    Agents of one type occupy a contiguous id block, in ``TYPE_ORDER``.
    """

    types: tuple[AgentType, ...]

    def __post_init__(self):
        if not self.types:
            raise ValueError("population must contain at least one agent")
        for t in self.types:
            if not isinstance(t, AgentType):
                raise TypeError(f"not an AgentType: {t!r}")

    @classmethod
    def from_counts(cls, counts: Mapping[AgentType | str, int]) -> "Population":
        parsed = {}
        for key, count in counts.items():
            t = key if isinstance(key, AgentType) else AgentType.parse(key)
            if count < 0:
                raise ValueError(f"negative count for {t.value}: {count}")
            parsed[t] = parsed.get(t, 0) + int(count)
        types: list[AgentType] = []
        for t in TYPE_ORDER:
            types.extend([t] * parsed.get(t, 0))
        return cls(tuple(types))

    @classmethod
    def preset(cls, name: str, n_authentic: int | None = None) -> "Population":
        """Named populations ``Full``, ``All``, ``B_up``, ``D_up``, ``L_up``.

        ``n_authentic`` overrides the number of authentic agents, e.g.
        ``preset("B_up", 1)`` is the one-authentic-agent booster population.
        """
        key = name.replace("↑", "_up").lower()
        if key == "full":
            counts = {t: 100 for t in INAUTHENTIC_TYPES}
            counts[AgentType.A] = 1000
        elif key == "all":
            counts = {t: 100 for t in TYPE_ORDER}
        elif key in ("b_up", "d_up", "l_up"):
            counts = {AgentType.A: 100, AgentType(key[0].upper() + "_up"): 100}
        else:
            raise ValueError(f"unknown population preset {name!r}")
        if n_authentic is not None:
            counts[AgentType.A] = n_authentic
        return cls.from_counts(counts)

    @property
    def n(self) -> int:
        return len(self.types)

    def counts(self) -> dict[AgentType, int]:
        c = Counter(self.types)
        return {t: c[t] for t in TYPE_ORDER if c[t]}

    def members(self, t: AgentType) -> np.ndarray:
        """Agent ids of type ``t`` in construction order."""
        return np.flatnonzero(self.codes == TYPE_ORDER.index(t))

    @cached_property
    def codes(self) -> np.ndarray:
        """Integer code per agent (index into ``TYPE_ORDER``)."""
        index = {t: i for i, t in enumerate(TYPE_ORDER)}
        return np.fromiter((index[t] for t in self.types), dtype=np.int8, count=self.n)

    @cached_property
    def families(self) -> np.ndarray:
        return np.array([t.family for t in TYPE_ORDER])[self.codes]

    @cached_property
    def directions(self) -> np.ndarray:
        return np.array([t.direction or "" for t in TYPE_ORDER])[self.codes]

    @property
    def authentic_mask(self) -> np.ndarray:
        return self.codes == 0

    def subset(self, agents: Iterable[int]) -> "Population":
        return Population(tuple(self.types[a] for a in agents))


@dataclass(frozen=True)
class NoiseLevel:
    """Probabilities that each of ``p1``, ``p2``, ``p3`` equals +1."""

    prob_p1: float
    prob_p2: float
    prob_p3: float

    def __post_init__(self):
        for p in (self.prob_p1, self.prob_p2, self.prob_p3):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability out of [0, 1]: {p}")

    @classmethod
    def preset(cls, name: str) -> "NoiseLevel":
        try:
            return NOISE_PRESETS[name.upper()]
        except KeyError:
            raise ValueError(f"unknown noise level {name!r}") from None

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.prob_p1, self.prob_p2, self.prob_p3)


LOW = NoiseLevel(0.75, 0.75, 0.9)
MID = NoiseLevel(0.75, 0.5, 0.5)
HIGH = NoiseLevel(0.75, 0.1, 0.1)
NOISE_PRESETS = {"LOW": LOW, "MID": MID, "HIGH": HIGH}


@dataclass(frozen=True)
class RoundState:
    """Sampled state of one voting round.

    ``beliefs`` has shape ``(n, 3)`` holding B(p1), B(p2), B(p3) per agent.
    ``personal`` holds p_a per agent; it is only meaningful for lone wolves
    (elsewhere it is 0).  Lone wolves believe their personal property
    exactly, so B(p_a) = p_a and it is not stored separately.
    """

    p: tuple[int, int, int]
    competence: np.ndarray
    beliefs: np.ndarray
    personal: np.ndarray

    @property
    def p1(self) -> int:
        return self.p[0]

    @property
    def p2(self) -> int:
        return self.p[1]

    @property
    def p3(self) -> int:
        return self.p[2]


def _sign(u: np.ndarray | float, prob: float):
    return np.where(u < prob, UP, DOWN).astype(np.int8)


def sample_round_state(
    pop: Population,
    noise: NoiseLevel,
    rng: np.random.Generator,
    competence: tuple[float, float] = COMPETENCE_RANGE,
) -> RoundState:
    """Sample properties, competences, beliefs and lone-wolf properties.

    The draw layout is fixed: three uniforms for the properties, then one
    block of ``n`` uniforms each for competence, belief on ``p1`` and the
    personal property.  Every agent therefore owns a fixed slot in each
    block, so changing one agent's type never shifts another agent's draws.
    """
    n = pop.n
    props = _sign(rng.random(3), np.array(noise.as_tuple()))
    p1, p2, p3 = (int(x) for x in props)
    lo, hi = competence
    comp = lo + (hi - lo) * rng.random(n)
    correct = rng.random(n) < comp
    personal_draw = _sign(rng.random(n), noise.prob_p3)

    beliefs = np.empty((n, 3), dtype=np.int8)
    beliefs[:, 0] = np.where(correct, p1, -p1)
    beliefs[:, 1] = p2
    beliefs[:, 2] = p3
    wolves = pop.families == "L"
    personal = np.where(wolves, personal_draw, 0).astype(np.int8)
    return RoundState((p1, p2, p3), comp, beliefs, personal)


def decide_vote(t: AgentType, agent: int, state: RoundState) -> int:
    """Vote of a single agent, straight from the behaviour tables."""
    b1, b2, b3 = (int(x) for x in state.beliefs[agent])
    authentic = b1
    if t is AgentType.A:
        return authentic
    if t.family == "B":
        if t is AgentType.B_UP:
            return UP if b2 == UP else authentic
        if t is AgentType.B_DOWN:
            return DOWN if b2 == DOWN else authentic
        return UP if b2 == UP else DOWN
    # Distorters are cued by p3, lone wolves by their personal property.
    cue = b3 if t.family == "D" else int(state.personal[agent])
    if t.family == "L" and cue == 0:
        raise ValueError(f"agent {agent} has no personal property in this state")
    if cue == DOWN:
        return authentic
    if t.direction == "up":
        return -b1 if b1 == DOWN else b1
    if t.direction == "down":
        return -b1 if b1 == UP else b1
    return -b1


def vote_profile(pop: Population, state: RoundState) -> np.ndarray:
    """Vectorised ``decide_vote`` over all agents (int8 vector)."""
    b1 = state.beliefs[:, 0]
    b2 = state.beliefs[:, 1]
    fam = pop.families
    direction = pop.directions

    votes = b1.copy()
    booster = fam == "B"
    votes[booster & (direction == "up") & (b2 == UP)] = UP
    votes[booster & (direction == "down") & (b2 == DOWN)] = DOWN
    both_b = booster & (direction == "both")
    votes[both_b] = b2[both_b]

    cue = np.where(fam == "L", state.personal, state.beliefs[:, 2])
    triggered = np.isin(fam, ["D", "L"]) & (cue == UP)
    flip = triggered & (
        (direction == "both")
        | ((direction == "up") & (b1 == DOWN))
        | ((direction == "down") & (b1 == UP))
    )
    votes[flip] = -b1[flip]
    return votes


def simulate_round(
    pop: Population,
    noise: NoiseLevel,
    rng: np.random.Generator,
    competence: tuple[float, float] = COMPETENCE_RANGE,
) -> tuple[RoundState, np.ndarray]:
    state = sample_round_state(pop, noise, rng, competence)
    return state, vote_profile(pop, state)
