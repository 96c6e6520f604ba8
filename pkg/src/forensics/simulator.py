"""
Synthetic elections with known fraud.

A precinct's electorate, turnout and YES intent are drawn first; signatures
and exit polls are noisy proxies of the intent,

    signatures  s = beta  * chi * (1 + sd_eta * z_s)
    exit poll   e = alpha * chi * (1 + sd_epsilon * z_e)

with ``chi`` the YES intent of the voters who showed up. Noise is scaled by
the proxy's own expectation so that, in the log specification used by the
fraud test, the proxy errors are homoskedastic and independent of intent.

A fraud mechanism then moves YES votes to NO; it never creates or destroys
votes. Ground truth (``chi`` and the fraud ``phi = nu - chi``) is returned
next to the :class:`~forensics.domain.Dataset`, never inside it.

Randomness is keyed by ``(seed, stream)`` through :class:`numpy.random.SeedSequence`,
with one stream per concern and one sub-stream per precinct for the machine
split, so the output does not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .domain import Dataset, ExitPollRow, MachineRecord, PrecinctRecord
from .exceptions import SimulationError

FRAUD_KINDS = ("none", "proportional", "nonproportional_band", "cap",
               "signature_correlated", "subset_only")

# stream ids for SeedSequence keys
_SIZE, _SHARE, _INTENT, _SIG, _POLL, _TAMPER, _MACHINE, _AUDIT, _POLLED = range(9)

NEGATIVE_COUNT_LIMIT = 0.10


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


@dataclass(frozen=True)
class FraudMechanism:
    """How YES votes are moved to NO.

    kind
        ``none``; ``proportional`` (YES times ``keep_fraction`` everywhere);
        ``nonproportional_band`` (YES cut by ``magnitude`` where the signature
        share of registered voters is outside [band_low, band_high]);
        ``cap`` (per-machine YES ceiling ``cap_level``, overflow to NO);
        ``signature_correlated`` (fraud only through the coupling
        ``SimulationParams.rho``); ``subset_only`` (a random ``tampered_share`` of precincts
        keep ``keep_fraction`` of YES, further shaded by
        ``(min share / share) ** magnitude`` so that their signature elasticity
        drops by ``magnitude``).
    """

    kind: str = "none"
    keep_fraction: float | None = None
    band_low: float | None = None
    band_high: float | None = None
    cap_level: int | None = None
    tampered_share: float | None = None
    magnitude: float | None = None

    def __post_init__(self):
        if self.kind not in FRAUD_KINDS:
            raise ValueError(f"unknown fraud kind {self.kind!r}")
        need = {
            "none": set(),
            "proportional": {"keep_fraction"},
            "nonproportional_band": {"band_low", "band_high", "magnitude"},
            "cap": {"cap_level"},
            "signature_correlated": set(),
            "subset_only": {"tampered_share"},
        }[self.kind]
        optional = {"subset_only": {"keep_fraction", "magnitude"}}.get(self.kind, set())
        given = {f for f in ("keep_fraction", "band_low", "band_high", "cap_level",
                             "tampered_share", "magnitude") if getattr(self, f) is not None}
        if need - given:
            raise ValueError(f"{self.kind} fraud requires {sorted(need - given)}")
        if given - need - optional:
            raise ValueError(f"{self.kind} fraud does not take {sorted(given - need - optional)}")
        if self.keep_fraction is not None and not 0 < self.keep_fraction <= 1:
            raise ValueError("keep_fraction must be in (0, 1]")
        if self.kind == "nonproportional_band":
            if not 0 <= self.band_low <= self.band_high <= 1:
                raise ValueError("band must satisfy 0 <= low <= high <= 1")
            if not 0 <= self.magnitude < 1:
                raise ValueError("band magnitude must be in [0, 1)")
        if self.cap_level is not None and self.cap_level < 0:
            raise ValueError("cap_level must be >= 0")
        if self.tampered_share is not None and not 0 <= self.tampered_share <= 1:
            raise ValueError("tampered_share must be in [0, 1]")
        if self.kind == "subset_only" and self.magnitude is not None and self.magnitude < 0:
            raise ValueError("elasticity shading magnitude must be >= 0")

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def proportional(cls, keep_fraction: float):
        return cls("proportional", keep_fraction=keep_fraction)

    @classmethod
    def band(cls, low: float, high: float, magnitude: float):
        return cls("nonproportional_band", band_low=low, band_high=high, magnitude=magnitude)

    @classmethod
    def cap(cls, level: int):
        return cls("cap", cap_level=level)

    @classmethod
    def signature_correlated(cls):
        return cls("signature_correlated")

    @classmethod
    def subset(cls, tampered_share: float, keep_fraction: float | None = None,
               elasticity_shift: float | None = None):
        return cls("subset_only", tampered_share=tampered_share,
                   keep_fraction=keep_fraction, magnitude=elasticity_shift)


@dataclass(frozen=True)
class CountDistribution:
    """Precinct electorate sizes: ``lognormal`` (loc = median, scale = log sd)
    or ``uniform`` (loc = low, scale = high)."""

    law: str = "lognormal"
    loc: float = 2500.0
    scale: float = 0.5

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.law == "lognormal":
            x = self.loc * np.exp(self.scale * rng.standard_normal(n))
        elif self.law == "uniform":
            x = rng.uniform(self.loc, self.scale, n)
        else:
            raise ValueError(f"unknown law {self.law!r}")
        return np.maximum(np.rint(x), 10).astype(np.int64)


@dataclass(frozen=True)
class SimulationParams:
    n_precincts: int = 342
    alpha: float = 1.0
    beta: float = 1.0
    sd_epsilon: float = 0.15
    sd_eta: float = 0.05
    rho: float = 0.0  # YES moves by rho * signatures on top of the fraud mechanism
    fraud: FraudMechanism = field(default_factory=FraudMechanism)
    voters_per_precinct: CountDistribution = field(default_factory=CountDistribution)
    # YES share of the electorate ~ Beta(share_a, share_b), clipped to share_clip
    share_a: float = 2.0
    share_b: float = 2.5
    share_clip: tuple[float, float] = (0.03, 0.97)
    # new voters and abstainers as fractions of the electorate; both grow
    # mildly with precinct size
    new_voter_share: float = 0.12
    new_voter_size_elasticity: float = 0.10
    new_voter_dispersion: float = 0.30
    abstention: float = 0.30
    abstention_size_elasticity: float = 0.05
    abstention_dispersion: float = 0.15
    noise: str = "normal"  # or "truncated_normal" (cut at +/- 2 sd)
    voters_per_machine: int | None = 450  # None: no machine level
    max_machines: int = 18
    machine_size_concentration: float | None = None  # None: equal machine probabilities
    n_polled: int | None = None  # None: every precinct has an exit poll
    seed: int = 0

    def __post_init__(self):
        if self.n_precincts < 10:
            raise ValueError("n_precincts must be >= 10")
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        for name in ("sd_epsilon", "sd_eta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0")
        if self.noise not in ("normal", "truncated_normal"):
            raise ValueError(f"unknown noise law {self.noise!r}")
        if self.n_polled is not None and not 0 <= self.n_polled <= self.n_precincts:
            raise ValueError("n_polled must be between 0 and n_precincts")
        if self.fraud.kind == "cap" and self.voters_per_machine is None:
            raise ValueError("cap fraud needs a machine level (voters_per_machine)")
        if self.fraud.kind == "signature_correlated" and self.rho == 0:
            raise ValueError("signature_correlated fraud needs rho != 0")
        if self.voters_per_machine is not None and self.voters_per_machine < 1:
            raise ValueError("voters_per_machine must be >= 1")


@dataclass(frozen=True)
class AuditStrategy:
    kind: str = "uniform_random"  # or "clean_only"
    sample_size: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("uniform_random", "clean_only"):
            raise ValueError(f"unknown audit strategy {self.kind!r}")
        if self.sample_size < 0:
            raise ValueError("sample_size must be >= 0")


@dataclass(frozen=True)
class GroundTruth:
    precinct_ids: tuple[str, ...]
    chi: np.ndarray  # YES intent of voters who showed up
    phi: np.ndarray  # official YES minus intent (<= 0 unless rho > 0)
    tampered: np.ndarray  # bool

    def log_phi(self, yes_votes) -> np.ndarray:
        """Fraud on the log scale, log(nu) - log(chi)."""
        return np.log(np.asarray(yes_votes, dtype=float)) - np.log(self.chi)


@dataclass(frozen=True)
class Simulation:
    dataset: Dataset
    truth: GroundTruth
    params: SimulationParams


def _noise(rng: np.random.Generator, n: int, law: str) -> np.ndarray:
    z = rng.standard_normal(n)
    if law == "truncated_normal":
        bad = np.abs(z) > 2
        while bad.any():
            z[bad] = rng.standard_normal(int(bad.sum()))
            bad = np.abs(z) > 2
    return z


def _precinct_ids(n: int) -> list[str]:
    width = len(str(n))
    return [f"P{i:0{width}d}" for i in range(1, n + 1)]


def _draw_electorate(p: SimulationParams):
    n = p.n_precincts
    electorate = p.voters_per_precinct.draw(_rng(p.seed, _SIZE, 0), n)
    rel = electorate / np.median(electorate)
    rng = _rng(p.seed, _SIZE, 1)
    g = p.new_voter_share * rel ** p.new_voter_size_elasticity * np.exp(
        p.new_voter_dispersion * rng.standard_normal(n))
    new = np.clip(np.rint(electorate * np.clip(g, 0.005, 0.8)), 1, electorate - 1).astype(np.int64)
    registered = electorate - new
    q = p.abstention * rel ** p.abstention_size_elasticity * np.exp(
        p.abstention_dispersion * rng.standard_normal(n))
    non_voters = np.clip(np.rint(electorate * np.clip(q, 0.01, 0.95)), 1, electorate - 1).astype(np.int64)
    return registered, new, non_voters


def _fraud_factor(p: SimulationParams, share: np.ndarray, tampered: np.ndarray) -> np.ndarray:
    f = p.fraud
    if f.kind == "proportional":
        return np.full(share.shape, f.keep_fraction)
    if f.kind == "nonproportional_band":
        hit = (share < f.band_low) | (share > f.band_high)
        return np.where(hit, 1.0 - f.magnitude, 1.0)
    if f.kind == "subset_only":
        factor = np.full(share.shape, f.keep_fraction if f.keep_fraction is not None else 1.0)
        if f.magnitude:
            pos = share[share > 0]
            floor = pos.min() if pos.size else 1.0
            factor = factor * (floor / np.maximum(share, floor)) ** f.magnitude
        return np.where(tampered, factor, 1.0)
    return np.ones(share.shape)


def generate(params: SimulationParams) -> Simulation:
    """Draw one synthetic election.

    Raises :class:`SimulationError` when more than 10% of precincts would
    need a proxy count floored at zero.
    """
    p = params
    n = p.n_precincts
    ids = _precinct_ids(n)
    registered, new, non_voters = _draw_electorate(p)
    electorate = registered + new
    voters = electorate - non_voters

    share = _rng(p.seed, _SHARE).beta(p.share_a, p.share_b, n)
    share = np.clip(share, *p.share_clip)
    chi = _rng(p.seed, _INTENT).binomial(voters, share).astype(np.int64)
    chi = np.maximum(chi, 1)

    s_cont = p.beta * chi * (1 + p.sd_eta * _noise(_rng(p.seed, _SIG), n, p.noise))
    e_cont = p.alpha * chi * (1 + p.sd_epsilon * _noise(_rng(p.seed, _POLL), n, p.noise))
    negative = int(np.sum((s_cont < 0) | (e_cont < 0)))
    if negative > NEGATIVE_COUNT_LIMIT * n:
        raise SimulationError(f"{negative} of {n} precincts have negative proxy counts; "
                              "reduce the noise standard deviations")
    signatures = np.maximum(np.rint(s_cont), 0).astype(np.int64)
    poll_yes = np.clip(np.rint(e_cont), 0, voters).astype(np.int64)

    sig_share = signatures / registered
    tampered = np.zeros(n, dtype=bool)
    if p.fraud.kind == "subset_only":
        n_tampered = int(round(p.fraud.tampered_share * n))
        pick = _rng(p.seed, _TAMPER).choice(n, size=n_tampered, replace=False)
        tampered[pick] = True
    factor = _fraud_factor(p, sig_share, tampered)

    yes = np.clip(np.rint(factor * chi + p.rho * signatures), 0, voters).astype(np.int64)

    machines: list[MachineRecord] = []
    if p.voters_per_machine is not None:
        machines, yes = split_to_machines(ids, electorate, voters, yes, p)

    if p.fraud.kind != "subset_only":
        tampered = yes != chi

    polled = np.ones(n, dtype=bool)
    if p.n_polled is not None and p.n_polled < n:
        polled[:] = False
        polled[_rng(p.seed, _POLLED).choice(n, size=p.n_polled, replace=False)] = True

    precincts = []
    polls = []
    for i, pid in enumerate(ids):
        rec = PrecinctRecord(
            precinct_id=pid,
            yes_votes=int(yes[i]),
            signatures=int(signatures[i]),
            registered_at_reafirmazo=int(registered[i]),
            new_voters=int(new[i]),
            non_voters=int(non_voters[i]),
            exit_poll_yes=int(poll_yes[i]) if polled[i] else None,
            exit_poll_total=int(voters[i]) if polled[i] else None,
        )
        precincts.append(rec)
        if polled[i]:
            polls.append(ExitPollRow(pid, int(poll_yes[i]), int(voters[i]), "merged"))

    truth = GroundTruth(tuple(ids), chi.astype(float), (yes - chi).astype(float), tampered)
    ds = Dataset(tuple(machines), tuple(precincts), f"simulated seed={p.seed} fraud={p.fraud.kind}",
                 tuple(polls))
    return Simulation(ds, truth, p)


def _machine_count(electorate: int, p: SimulationParams) -> int:
    return int(min(p.max_machines, max(1, round(electorate / p.voters_per_machine))))


def allocate_yes(rng: np.random.Generator, cast, yes: int) -> np.ndarray:
    """Spread ``yes`` YES votes over machines with ``cast`` votes each, as a
    uniformly random subset of the precinct's voters."""
    return rng.multivariate_hypergeometric(np.asarray(cast, dtype=np.int64), int(yes))


def split_to_machines(precinct_ids, electorate, voters, yes, params: SimulationParams):
    """Allocate each precinct's electorate, voters and YES votes to machines.

    Registered voters are assigned to machines multinomially (equal
    probabilities unless ``machine_size_concentration`` is set, in which case
    the probabilities are Dirichlet draws). Voters who turned out and then
    YES voters are random subsets, drawn by multivariate hypergeometric
    sampling, so machine YES counts are binomial in the precinct share and
    add up exactly. Under cap fraud each machine's YES is truncated at
    ``cap_level`` and the precinct YES is recomputed.

    Returns ``(machines, precinct_yes)``.
    """
    p = params
    cap = p.fraud.cap_level if p.fraud.kind == "cap" else None
    machines: list[MachineRecord] = []
    new_yes = np.asarray(yes, dtype=np.int64).copy()
    for i, pid in enumerate(precinct_ids):
        rng = _rng(p.seed, _MACHINE, i)
        k = _machine_count(int(electorate[i]), p)
        if p.machine_size_concentration is not None and k > 1:
            probs = rng.dirichlet(np.full(k, p.machine_size_concentration))
        else:
            probs = np.full(k, 1.0 / k)
        reg = rng.multinomial(int(electorate[i]), probs)
        cast = rng.multivariate_hypergeometric(reg, int(voters[i]))
        m_yes = allocate_yes(rng, cast, int(yes[i]))
        if cap is not None:
            m_yes = np.minimum(m_yes, cap)
            new_yes[i] = m_yes.sum()
        width = len(str(k))
        for j in range(k):
            machines.append(MachineRecord(f"{pid}-M{j + 1:0{width}d}", pid, int(m_yes[j]),
                                          int(cast[j] - m_yes[j]), int(reg[j])))
    return machines, new_yes


def select_audit(sim: Simulation, strategy: AuditStrategy) -> Simulation:
    """Mark ``strategy.sample_size`` precincts as audited.

    ``uniform_random`` samples all precincts without replacement;
    ``clean_only`` samples only precincts whose YES count was untouched.
    """
    ids = np.array(sim.truth.precinct_ids)
    if strategy.kind == "clean_only":
        pool = np.flatnonzero(~sim.truth.tampered)
    else:
        pool = np.arange(ids.size)
    if strategy.sample_size > pool.size:
        raise SimulationError(f"audit of {strategy.sample_size} needs more than the "
                              f"{pool.size} eligible precincts")
    rng = _rng(strategy.seed, _AUDIT)
    chosen = rng.choice(pool, size=strategy.sample_size, replace=False)
    return replace(sim, dataset=sim.dataset.with_audited(ids[chosen]))


def simulate(params: SimulationParams, audit: AuditStrategy | None = None) -> Simulation:
    sim = generate(params)
    if audit is not None:
        sim = select_audit(sim, audit)
    return sim


# Fig. 3a: intent vs signatures with about 0.7 votes per signature and a
# bounded per-signature error of +/- 0.1.
_FIG3_BASE = SimulationParams(
    n_precincts=342,
    beta=1 / 0.7,
    sd_eta=0.05 / 0.7,
    noise="truncated_normal",
    voters_per_precinct=CountDistribution("uniform", 500, 5000),
    voters_per_machine=None,
)

PRESETS: dict[str, tuple[SimulationParams, AuditStrategy | None]] = {
    "null": (SimulationParams(n_precincts=1000, n_polled=342), AuditStrategy("uniform_random", 200)),
    "fig3a": (_FIG3_BASE, None),
    "fig3b": (replace(_FIG3_BASE, fraud=FraudMechanism.proportional(0.7)), None),
    "fig3c": (replace(_FIG3_BASE, fraud=FraudMechanism.band(0.3, 0.7, 0.3)), None),
    "caps": (SimulationParams(n_precincts=1000, n_polled=342, voters_per_machine=400,
                              machine_size_concentration=20.0, fraud=FraudMechanism.cap(150)),
             AuditStrategy("uniform_random", 200)),
    "audit_evasion": (SimulationParams(n_precincts=4580, n_polled=342, voters_per_machine=None,
                                       fraud=FraudMechanism.subset(3000 / 4580, elasticity_shift=0.15)),
                      AuditStrategy("clean_only", 200)),
}


def preset(name: str, seed: int) -> tuple[SimulationParams, AuditStrategy | None]:
    """Parameters and audit strategy of a named scenario, reseeded."""
    try:
        params, audit = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    params = replace(params, seed=seed)
    if audit is not None:
        audit = replace(audit, seed=seed)
    return params, audit


def simulate_preset(name: str, seed: int) -> Simulation:
    params, audit = preset(name, seed)
    return simulate(params, audit)


def elasticity_gap_scenario(seed: int = 0, n_precincts: int = 4580, audited: int = 2290,
                            gap: float = 0.1) -> Simulation:
    """Two subsets that naive checks cannot tell apart.

    A clean election is drawn and ``audited`` precincts, chosen at random, are
    marked audited. In the others YES is rescaled to
    ``c * yes * (signatures / registered) ** -gap``, which lowers their
    signature elasticity by ``gap``. The audited YES counts get independent
    multiplicative noise sized so that the signature/YES correlation is the
    same in both subsets, and ``c`` makes the mean YES shares equal. Neither
    step moves the audited subset's elasticities.
    """
    params = SimulationParams(n_precincts=n_precincts, voters_per_machine=None, seed=seed)
    sim = generate(params)
    d = sim.dataset
    rng = _rng(seed, _AUDIT)
    marked = np.zeros(n_precincts, dtype=bool)
    marked[rng.choice(n_precincts, size=audited, replace=False)] = True
    z = rng.standard_normal(n_precincts)

    yes = np.array([p.yes_votes for p in d.precincts], dtype=float)
    cast = np.array([p.votes_cast for p in d.precincts], dtype=float)
    sigs = np.array([p.signatures for p in d.precincts], dtype=float)
    sig_share = sigs / np.array([p.registered_at_reafirmazo for p in d.precincts])

    def corr(a, b):
        return np.corrcoef(a, b)[0, 1]

    bent = yes * sig_share ** -gap
    target_corr = corr(sigs[~marked], bent[~marked])

    def noisy(sd):
        return np.clip(np.rint(yes * np.exp(sd * z - sd ** 2 / 2)), 1, cast)

    if corr(sigs[marked], yes[marked]) > target_corr:
        sd = brentq(lambda v: corr(sigs[marked], noisy(v)[marked]) - target_corr, 0.0, 1.0)
        audited_yes = noisy(sd)
    else:
        audited_yes = yes
    target_share = np.mean(audited_yes[marked] / cast[marked])
    c = target_share / np.mean(bent[~marked] / cast[~marked])
    new_yes = np.where(marked, audited_yes, np.clip(np.rint(c * bent), 1, cast)).astype(np.int64)

    precincts = tuple(replace(p, yes_votes=int(v), audited=bool(a))
                      for p, v, a in zip(d.precincts, new_yes, marked))
    ds = replace(d, precincts=precincts, provenance=f"elasticity gap {gap} seed={seed}")
    truth = replace(sim.truth, phi=(new_yes - sim.truth.chi).astype(float), tampered=~marked)
    return Simulation(ds, truth, params)
