"""Single-node collision pipeline of the kinetic automaton (kinon).

A kinon holds a conserved scalar quantity split between a private storage
value and per-link exchange buffers.  One collision applies the conservative
rank transform: encode the gathered quantity into relative channel ranks,
modulate the ranks through the kinetic map, then decode the rates back into
absolute outputs.  Quantities themselves are never transformed, only their
relative values, so the node total is conserved by construction.

Four tunable filters extend the basic transform:

* lambda-filter: leaky integrators on every channel; the integrated channel
  potentials (not the raw quantities) are what gets ranked.
* psi-filter: a monotone measurement map applied to the potentials before
  rank normalization.
* eta-filter: a shunt that withholds a fraction of the gathered quantity
  from distribution.
* theta-filter: truncation of sub-threshold raw outputs; truncated quantity
  stays in local storage.

With all filters at their defaults (lambda=eta=theta=0, psi=identity) the
pipeline reduces exactly to the basic transform where ranks are the plain
quantity shares.

This module is the scalar reference implementation; the array engine in
``network`` performs the identical operations per node and stays
bit-compatible with it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._numeric import comp_sum, comp_sum_parts

PSI_KINDS = ("identity", "log1p", "power")


@dataclass(frozen=True)
class PsiSpec:
    """Descriptor of the measurement map applied to channel potentials.

    The represented function maps non-negative reals to non-negative reals,
    is monotone non-decreasing and fixes zero, so empty channels always
    measure as zero.
    """

    kind: str = "identity"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in PSI_KINDS:
            raise ValueError(f"unknown psi kind {self.kind!r}, expected one of {PSI_KINDS}")
        if self.kind == "power":
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("psi kind 'power' requires gamma > 0")
        elif self.gamma is not None:
            raise ValueError(f"psi kind {self.kind!r} takes no gamma")


@dataclass(frozen=True)
class ModelParams:
    """The tunable parameter set {kappa, lambda, eta, theta, psi}.

    ``lam`` is the lambda retention rate (named to dodge the keyword).
    Defaults reduce the extended pipeline to the basic model.
    """

    kappa: float
    lam: float = 0.0
    eta: float = 0.0
    theta: float = 0.0
    psi: PsiSpec = field(default_factory=PsiSpec)

    def __post_init__(self):
        if not self.kappa >= 0:
            raise ValueError("kappa must be >= 0")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must be in [0, 1]")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must be in [0, 1]")
        if not self.theta >= 0:
            raise ValueError("theta must be >= 0")

    def check_theta_against_total(self, omega: float) -> None:
        """Reject a truncation threshold that is not small next to the
        network total; the threshold acts on single channel outputs."""
        if self.theta > omega / 100.0:
            raise ValueError(
                f"theta={self.theta} too large for total quantity {omega}"
                f" (must be <= {omega / 100.0})"
            )


@dataclass
class KinonState:
    """Per-node state between collisions.

    ``potentials`` has one slot more than the link vectors: slot 0 is the
    storage-channel potential, slot j the potential of input channel j.
    Potentials are perception only; they never carry conserved quantity.
    """

    degree: int
    inputs: list[float]
    outputs: list[float]
    storage_out: float
    potentials: list[float]

    @classmethod
    def empty(cls, degree: int) -> "KinonState":
        return cls(
            degree=degree,
            inputs=[0.0] * degree,
            outputs=[0.0] * degree,
            storage_out=0.0,
            potentials=[0.0] * (degree + 1),
        )

    def mass(self) -> float:
        """Total local quantity: storage plus both exchange buffers."""
        return comp_sum([self.storage_out, *self.inputs, *self.outputs])


@dataclass
class CollisionTrace:
    """Intermediate values of one collision, kept for tests and analytics.

    ``s_in`` is the gathered input storage (storage + all inputs).  Ranks
    and rates carry the storage channel in slot 0, link channels after.
    """

    s_in: float
    psi_values: list[float]
    ranks: list[float]
    rates: list[float] = field(default_factory=list)
    s_shunt: float = 0.0
    s_dist: float = 0.0
    raw_outputs: list[float] = field(default_factory=list)


def kinetic_map(x: float, kappa: float) -> float:
    """Affine kinetic map y = max(0, 1 - kappa*x) on a rank in [0, 1]."""
    return max(0.0, 1.0 - kappa * x)


def leaky_update(potential: float, observed: float, lam: float) -> float:
    """One leaky-integrator step: retain ``lam`` of the potential, add the
    observation.  lam=0 is memoryless, lam=1 a perfect accumulator."""
    return lam * potential + observed


def psi_eval(spec: PsiSpec, x: float) -> float:
    """Evaluate the measurement map at a non-negative value.

    Routed through numpy scalar ufuncs so results are bit-identical to the
    array engine's.
    """
    if spec.kind == "identity":
        return float(x)
    if spec.kind == "log1p":
        return float(np.log1p(x))
    return float(np.power(x, spec.gamma))


def encode(state: KinonState, params: ModelParams) -> CollisionTrace:
    """Gather the node quantity and turn channel potentials into ranks.

    Updates the potentials in place (their once-per-cycle update), measures
    them through psi and normalizes by the measured total.  A zero measured
    total is the empty-node branch: all ranks zero, no division happens.
    """
    channels = [state.storage_out, *state.inputs]
    s_in = comp_sum(channels)
    state.potentials = [
        leaky_update(a, x, params.lam) for a, x in zip(state.potentials, channels)
    ]
    psi_values = [psi_eval(params.psi, a) for a in state.potentials]
    total = comp_sum(psi_values)
    if total > 0.0:
        ranks = [p / total for p in psi_values]
    else:
        ranks = [0.0] * len(psi_values)
    return CollisionTrace(s_in=s_in, psi_values=psi_values, ranks=ranks)


def modulate(trace: CollisionTrace, kappa: float) -> CollisionTrace:
    """Map every rank (storage channel included) through the kinetic map."""
    trace.rates = [kinetic_map(r, kappa) for r in trace.ranks]
    return trace


def decode(state: KinonState, trace: CollisionTrace, params: ModelParams) -> KinonState:
    """Distribute the gathered quantity according to the rates.

    The shunt keeps eta of the gathered quantity in place, the remainder is
    split proportionally to the rates (the storage rate competes in the
    denominator).  Raw outputs below theta are truncated and their quantity
    stays local.  The new storage is the exact complement of the kept
    outputs, so the node total is conserved to the summation scheme's
    accuracy; a clamp guards the non-negativity invariant against a
    final-ulp undershoot.
    """
    s_shunt = params.eta * trace.s_in
    s_dist = trace.s_in - s_shunt
    d_total = comp_sum(trace.rates)
    if d_total > 0.0:
        raw = [(r * s_dist) / d_total for r in trace.rates[1:]]
    else:
        raw = [0.0] * state.degree
    outs = [o if o >= params.theta else 0.0 for o in raw]
    dist_sum, dist_corr = comp_sum_parts(outs)
    new_storage = (trace.s_in - dist_sum) - dist_corr
    if new_storage < 0.0:
        new_storage = 0.0
    state.outputs = outs
    state.storage_out = new_storage
    state.inputs = [0.0] * state.degree
    trace.s_shunt = s_shunt
    trace.s_dist = s_dist
    trace.raw_outputs = raw
    return state


def collide(state: KinonState, params: ModelParams) -> CollisionTrace:
    """Full conservative rank transform: encode, modulate, decode."""
    trace = encode(state, params)
    modulate(trace, params.kappa)
    decode(state, trace, params)
    return trace
