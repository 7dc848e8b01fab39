"""The reduction engine and the mechanical verifiers.

A step is either a local action at a site or a migration between sites;
migrations fire only when the target's membrane admits the agent. The
admission predicate comes in three flavours: entry membranes check the
incoming agent alone, static resident membranes re-infer the resident
code's usage on every admission, and dynamic resident membranes keep a
decreasing budget in the policy itself.

The verifiers turn the calculus' soundness statements into bounded
executable checks: subject reduction (well-formedness is preserved by
every reachable step) and safety (traces at trustworthy sites stay within
the governing policy).
"""
from __future__ import annotations

import enum
import random
from collections import Counter, deque
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .core import (
    Act, Agent, Go, Membrane, NIL, Nil, Par, Policy, PolicyRegime, Repl,
    System, TrustLevel, agent_key, is_trustworthy, normalize,
    normalize_system, system_key, threads, validate_system,
)
from .policy_dfa import (
    DEFAULT_BOUND, DfaPolicy, accepts_from, cre_of, enforces_dfa, lang_words,
    satisfies_dfa, wellformed_dfa, explain_wellformed_dfa,
)
from .policy_multiset import (
    MultisetPolicy, enforces_multiset, infer_policy, join, subtract,
    typecheck_multiset, wellformed_multiset, wellformed_resident,
    wellformed_static, explain_wellformed_multiset, explain_wellformed_resident,
    explain_wellformed_static,
)
from .policy_set import (
    SetPolicy, enforces_set, typecheck_set, wellformed_set,
    explain_wellformed_set,
)


class MembraneKind(enum.Enum):
    ENTRY = "entry"
    RESIDENT_STATIC = "static"
    RESIDENT_DYNAMIC = "dynamic"


@dataclass(frozen=True)
class Mode:
    """A run configuration: which policy regime, and how membranes behave.

    Resident membranes are defined for multiset policies only.
    """

    regime: PolicyRegime
    kind: MembraneKind = MembraneKind.ENTRY
    dfa_bound: int = DEFAULT_BOUND

    def __post_init__(self):
        if self.kind != MembraneKind.ENTRY and self.regime != PolicyRegime.MULTISET:
            raise ValueError("resident membranes require the multiset regime")

    @classmethod
    def of(cls, regime: str | PolicyRegime, kind: str | MembraneKind = MembraneKind.ENTRY,
           dfa_bound: int = DEFAULT_BOUND) -> "Mode":
        if isinstance(regime, str):
            regime = PolicyRegime(regime)
        if isinstance(kind, str):
            kind = MembraneKind(kind)
        return cls(regime, kind, dfa_bound)


# ---------------------------------------------------------------------------
# Events


@dataclass(frozen=True)
class LocalAction:
    site: str
    action: str
    step: int = 0

    def render(self) -> str:
        return f"[{self.step}] {self.site}: act {self.action}"


@dataclass(frozen=True)
class Migration:
    source: str
    target: str
    digest: Policy
    admitted: bool
    reason: str
    step: int = 0

    def render(self) -> str:
        status = "admitted" if self.admitted else "DENIED"
        note = f" ({self.reason})" if self.reason else ""
        return f"[{self.step}] {self.source} -> {self.target}: go {self.digest} {status}{note}"


Event = LocalAction | Migration


def _event_key(e: Event) -> tuple:
    if isinstance(e, LocalAction):
        return ("act", e.site, e.action)
    return ("go", e.source, e.target, str(e.digest), e.admitted, e.reason)


# ---------------------------------------------------------------------------
# Admission


@dataclass(frozen=True)
class Admission:
    """Verdict of the membrane on one migration attempt.

    `decision` is admit, deny, or unknown (a DFA search that hit its
    bound; the engine fails closed and treats it as a denial, but reports
    it distinctly). On admit, `membrane` is the target's membrane after
    the admission: unchanged except under dynamic membranes, which pay
    the agent's budget out of the policy.
    """

    decision: str  # "admit" | "deny" | "unknown"
    membrane: Membrane | None = None
    reason: str = ""

    @property
    def admitted(self) -> bool:
        return self.decision == "admit"


def _admit(membrane: Membrane, reason: str = "") -> Admission:
    return Admission("admit", membrane, reason)


def _deny(reason: str) -> Admission:
    return Admission("deny", None, reason)


def allows(membrane: Membrane, source: str, digest: Policy, code: Agent,
           mode: Mode, resident: Agent = NIL) -> Admission:
    """The membrane's admission predicate for an agent arriving from `source`.

    If the source is trusted (good), only the professed digest is checked
    against the policy; work shifts to the certifier, and the code body
    is never inspected. Otherwise the code itself is checked. Unknown
    sources count as untrusted. `resident` is the target's current code,
    consulted only by resident membranes.
    """
    if digest.regime != mode.regime or membrane.policy.regime != mode.regime:
        raise ValueError(
            f"regime mismatch: mode is {mode.regime.value}, digest is "
            f"{digest.regime.value}, policy is {membrane.policy.regime.value}")
    trusted = membrane.trust_of(source) == TrustLevel.LGOOD
    policy = membrane.policy

    if mode.kind == MembraneKind.ENTRY:
        if mode.regime == PolicyRegime.SET:
            if trusted:
                if enforces_set(digest, policy):
                    return _admit(membrane, f"digest {digest} enforces {policy}")
                return _deny(f"digest {digest} does not enforce {policy}")
            if typecheck_set(code, policy):
                return _admit(membrane, f"code conforms to {policy}")
            return _deny(f"code does not conform to {policy}")
        if mode.regime == PolicyRegime.MULTISET:
            if trusted:
                if enforces_multiset(digest, policy):
                    return _admit(membrane, f"digest {digest} enforces {policy}")
                return _deny(f"digest {digest} does not enforce {policy}")
            if typecheck_multiset(code, policy):
                return _admit(membrane, f"code conforms to {policy}")
            return _deny(f"code does not conform to {policy}")
        # DFA regime
        if trusted:
            if enforces_dfa(digest.dfa, policy.dfa):
                return _admit(membrane, f"digest {digest} enforces {policy}")
            return _deny(f"digest {digest} does not enforce {policy}")
        check = satisfies_dfa(code, policy.dfa, mode.dfa_bound)
        if check.verdict == "yes":
            return _admit(membrane, f"code conforms to {policy}")
        if check.verdict == "unknown":
            return Admission("unknown", None,
                             f"inconclusive: bound {mode.dfa_bound} exceeded checking {policy}")
        cex = f" (counterexample: '{' '.join(check.counterexample)}')" if check.counterexample else ""
        return _deny(f"code does not conform to {policy}{cex}")

    if mode.kind == MembraneKind.RESIDENT_STATIC:
        if trusted:
            resident_usage = infer_policy(resident)
            if resident_usage is None:
                return _deny("resident code has an invalid digest")
            combined = join(digest, resident_usage)
            if enforces_multiset(combined, policy):
                return _admit(membrane, f"digest plus resident usage {combined} fits {policy}")
            return _deny(f"digest plus resident usage {combined} exceeds {policy}")
        if typecheck_multiset(Par(code, resident), policy):
            return _admit(membrane, f"incoming and resident code jointly fit {policy}")
        return _deny(f"incoming and resident code jointly exceed {policy}")

    # Dynamic membranes: charge the admitted agent's budget to the policy.
    budget = digest if trusted else infer_policy(code)
    if budget is None:
        return _deny("code has an invalid digest")
    source_kind = "digest" if trusted else "inferred usage"
    if enforces_multiset(budget, policy):
        return _admit(membrane.with_policy(subtract(policy, budget)),
                      f"{source_kind} {budget} paid out of {policy}")
    return _deny(f"{source_kind} {budget} exceeds remaining budget {policy}")


# ---------------------------------------------------------------------------
# Reduction


@dataclass(frozen=True)
class _ActRedex:
    action: str
    residual: Agent


@dataclass(frozen=True)
class _GoRedex:
    target: str
    digest: Policy
    moving: Agent
    residual: Agent


def _redexes(a: Agent) -> list:
    """All immediate redexes of an agent, with the site-local residual left
    behind when each one fires. Replication is unfolded lazily: redexes of
    the body appear once, with the replica preserved in the residual.
    """
    if isinstance(a, Nil):
        return []
    if isinstance(a, Act):
        return [_ActRedex(a.action, a.cont)]
    if isinstance(a, Go):
        return [_GoRedex(a.target, a.digest, a.cont, NIL)]
    if isinstance(a, Par):
        out = []
        for r in _redexes(a.left):
            out.append(replace(r, residual=Par(r.residual, a.right)))
        for r in _redexes(a.right):
            out.append(replace(r, residual=Par(a.left, r.residual)))
        return out
    if isinstance(a, Repl):
        return [replace(r, residual=Par(r.residual, a)) for r in _redexes(a.body)]
    raise TypeError(f"not an agent: {a!r}")


def step(n: System, mode: Mode) -> list[tuple[System, Event]]:
    """All distinct one-step successors of the system, with their events.

    Distinctness is up to structural equivalence (normalized forms).
    Denied migrations contribute no successor; the rule's side condition
    is simply false; `run` reports them once the system is stuck.
    """
    out: dict[tuple, tuple[System, Event]] = {}
    for site in n.sites:
        for redex in _redexes(site.agent):
            if isinstance(redex, _ActRedex):
                succ = normalize_system(n.replace(site.name, agent=redex.residual))
                event: Event = LocalAction(site.name, redex.action)
            else:
                if redex.target == site.name:
                    continue  # the rule needs two distinct sites
                target = n.get(redex.target)
                if target is None:
                    continue
                verdict = allows(target.membrane, site.name, redex.digest,
                                 redex.moving, mode, resident=target.agent)
                if not verdict.admitted:
                    continue
                moved = n.replace(site.name, agent=redex.residual)
                moved = moved.replace(redex.target, membrane=verdict.membrane,
                                      agent=Par(redex.moving, target.agent))
                succ = normalize_system(moved)
                event = Migration(site.name, redex.target, redex.digest, True, verdict.reason)
            out.setdefault((_event_key(event), system_key(succ)), (succ, event))
    return [out[k] for k in sorted(out)]


def blocked_migrations(n: System, mode: Mode) -> list[Migration]:
    """Every migration redex that cannot fire right now, as non-admitted events."""
    out: dict[tuple, Migration] = {}
    for site in n.sites:
        for redex in _redexes(site.agent):
            if not isinstance(redex, _GoRedex):
                continue
            if redex.target == site.name:
                event = Migration(site.name, redex.target, redex.digest, False,
                                  "cannot migrate to the current site")
            else:
                target = n.get(redex.target)
                if target is None:
                    event = Migration(site.name, redex.target, redex.digest, False,
                                      f"no site named '{redex.target}'")
                else:
                    verdict = allows(target.membrane, site.name, redex.digest,
                                     redex.moving, mode, resident=target.agent)
                    if verdict.admitted:
                        continue
                    event = Migration(site.name, redex.target, redex.digest, False, verdict.reason)
            out.setdefault(_event_key(event), event)
    return [out[k] for k in sorted(out)]


def run(n: System, mode: Mode, max_steps: int, seed: int) -> tuple[list[Event], System]:
    """Reduce the system with a seeded scheduler until quiescent or out of steps.

    Successors are picked uniformly at random; identical inputs give
    identical traces. When the system quiesces, any migrations still
    pending are appended as denial events, so permanently stuck agents
    show up in the trace.
    """
    problems = validate_system(n, mode.regime)
    if problems:
        raise ValueError("invalid system: " + "; ".join(d.message for d in problems))
    rng = random.Random(seed)
    events: list[Event] = []
    current = normalize_system(n)
    for i in range(max_steps):
        successors = step(current, mode)
        if not successors:
            break
        current, event = successors[rng.randrange(len(successors))]
        events.append(replace(event, step=i))
    if not step(current, mode):
        for blocked in blocked_migrations(current, mode):
            events.append(replace(blocked, step=len(events)))
    return events, current


# ---------------------------------------------------------------------------
# The agent transition system


def lts_step(p: Agent) -> list[tuple[str, Agent]]:
    """The labelled transitions of an agent: actions emit their name and
    continue; migrations emit the target name and leave nothing behind
    (the continuation runs elsewhere); replication unfolds one copy.
    Residuals are normalized and the list deduplicated.
    """
    out: dict[tuple, tuple[str, Agent]] = {}
    for label, residual in _lts_raw(p):
        norm = normalize(residual)
        out.setdefault((label, agent_key(norm)), (label, norm))
    return [out[k] for k in sorted(out)]


def _lts_raw(p: Agent) -> Iterable[tuple[str, Agent]]:
    if isinstance(p, Nil):
        return
    elif isinstance(p, Act):
        yield p.action, p.cont
    elif isinstance(p, Go):
        yield p.target, NIL
    elif isinstance(p, Par):
        for label, residual in _lts_raw(p.left):
            yield label, Par(residual, p.right)
        for label, residual in _lts_raw(p.right):
            yield label, Par(p.left, residual)
    elif isinstance(p, Repl):
        # one unfolding per derivation: the replica survives alongside the
        # moved copy's residual; idle extra copies would add nothing
        for label, residual in _lts_raw(p.body):
            yield label, Par(residual, p)
    else:
        raise TypeError(f"not an agent: {p!r}")


def agent_traces(p: Agent, depth: int) -> set[tuple[str, ...]]:
    """All label sequences of length at most `depth` the agent can perform."""
    out: set[tuple[str, ...]] = {()}
    traces: dict[Agent, set[tuple[str, ...]]] = {normalize(p): {()}}
    for _ in range(depth):
        nxt: dict[Agent, set[tuple[str, ...]]] = {}
        for agent, prefixes in traces.items():
            for label, residual in lts_step(agent):
                extended = {prefix + (label,) for prefix in prefixes}
                out.update(extended)
                nxt.setdefault(residual, set()).update(extended)
        traces = nxt
        if not traces:
            break
    return out


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class Finding:
    site: str
    thread: int | None  # None for whole-site checks
    trace: tuple[str, ...]
    reason: str
    inconclusive: bool = False

    def render(self) -> str:
        thread = "-" if self.thread is None else str(self.thread)
        trace = " ".join(self.trace)
        return f"{self.site}\t{thread}\t{trace}\t{self.reason}"


@dataclass(frozen=True)
class Report:
    findings: tuple[Finding, ...] = ()

    @property
    def violations(self) -> list[Finding]:
        return [f for f in self.findings if not f.inconclusive]

    @property
    def unknowns(self) -> list[Finding]:
        return [f for f in self.findings if f.inconclusive]

    @property
    def ok(self) -> bool:
        return not self.findings

    def render(self) -> str:
        lines = [f.render() for f in self.findings]
        count = len(self.violations)
        lines.append("SUMMARY ok" if count == 0 else f"SUMMARY violations={count}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Well-formedness dispatch


def wellformed(n: System, mode: Mode,
               theta: Mapping[str, MultisetPolicy] | None = None) -> bool | None:
    """The regime's well-formedness judgment; None means inconclusive (DFA bound)."""
    if mode.regime == PolicyRegime.SET:
        return wellformed_set(n)
    if mode.regime == PolicyRegime.DFA:
        return wellformed_dfa(n, mode.dfa_bound)
    if mode.kind == MembraneKind.ENTRY:
        return wellformed_multiset(n)
    if mode.kind == MembraneKind.RESIDENT_STATIC:
        return wellformed_static(n)
    if theta is None:
        raise ValueError("dynamic membranes need a resident record (theta)")
    return wellformed_resident(n, theta)


def explain_wellformed(n: System, mode: Mode,
                       theta: Mapping[str, MultisetPolicy] | None = None) -> list[str]:
    if mode.regime == PolicyRegime.SET:
        return explain_wellformed_set(n)
    if mode.regime == PolicyRegime.DFA:
        return explain_wellformed_dfa(n, mode.dfa_bound)
    if mode.kind == MembraneKind.ENTRY:
        return explain_wellformed_multiset(n)
    if mode.kind == MembraneKind.RESIDENT_STATIC:
        return explain_wellformed_static(n)
    if theta is None:
        raise ValueError("dynamic membranes need a resident record (theta)")
    return explain_wellformed_resident(n, theta)


# ---------------------------------------------------------------------------
# Safety verification


def _trace_set_policy(trace: tuple[str, ...]) -> SetPolicy:
    return SetPolicy.of(trace)


def _trace_multiset(trace: tuple[str, ...]) -> MultisetPolicy:
    return MultisetPolicy.of(Counter(trace))


def verify_safety(n: System, mode: Mode, depth: int,
                  theta: Mapping[str, MultisetPolicy] | None = None) -> Report:
    """Check the regime's safety statement on every trustworthy site, by
    exhaustive trace enumeration up to `depth`.

    set: the labels of any trace of the site's code stay within the policy.
    multiset entry: per thread, trace label counts stay within the policy.
    multiset static: joint trace label counts stay within the policy.
    multiset dynamic: joint trace label counts stay within theta[site].
    dfa: per thread, every complete word the thread's trace expression can
         produce (up to `depth`) is a suffix of an accepted word, i.e. is
         accepted from some automaton state.

    Violations are data, not errors; meaningful when the applicable
    well-formedness held, since the theorems assume it.
    """
    findings: list[Finding] = []
    for site in n.sites:
        if not is_trustworthy(site):
            continue
        policy = site.membrane.policy
        if mode.regime == PolicyRegime.SET:
            for trace in sorted(agent_traces(site.agent, depth)):
                if not enforces_set(_trace_set_policy(trace), policy):
                    findings.append(Finding(
                        site.name, None, trace,
                        f"trace labels {_trace_set_policy(trace)} escape {policy}"))
        elif mode.regime == PolicyRegime.MULTISET:
            if mode.kind == MembraneKind.ENTRY:
                for i, thread in enumerate(threads(site.agent)):
                    for trace in sorted(agent_traces(thread, depth)):
                        if not enforces_multiset(_trace_multiset(trace), policy):
                            findings.append(Finding(
                                site.name, i, trace,
                                f"trace uses {_trace_multiset(trace)}, exceeding {policy}"))
            else:
                if mode.kind == MembraneKind.RESIDENT_DYNAMIC:
                    if theta is None:
                        raise ValueError("dynamic membranes need a resident record (theta)")
                    bound = theta[site.name]
                else:
                    bound = policy
                for trace in sorted(agent_traces(site.agent, depth)):
                    if not enforces_multiset(_trace_multiset(trace), bound):
                        findings.append(Finding(
                            site.name, None, trace,
                            f"trace uses {_trace_multiset(trace)}, exceeding {bound}"))
        else:
            if not isinstance(policy, DfaPolicy):
                findings.append(Finding(site.name, None, (), "membrane policy is not a DFA policy"))
                continue
            dfa = policy.dfa
            for i, thread in enumerate(threads(site.agent)):
                for word in sorted(lang_words(cre_of(thread), depth)):
                    if not any(accepts_from(dfa, s, word) for s in sorted(dfa.states)):
                        findings.append(Finding(
                            site.name, i, word,
                            f"word is a suffix of no word accepted by {policy}"))
    return Report(tuple(findings))


def verify_subject_reduction(n: System, mode: Mode, depth: int,
                             theta: Mapping[str, MultisetPolicy] | None = None) -> Report:
    """Breadth-first search over reductions to `depth`, re-checking
    well-formedness at every reachable system (the initial one included).

    Any failure would falsify the preservation theorem for the regime, or
    reveal an implementation bug, which is the point of running this.
    """
    findings: list[Finding] = []
    root = normalize_system(n)
    seen = {system_key(root)}
    queue = deque([(root, ())])
    while queue:
        current, path = queue.popleft()
        verdict = wellformed(current, mode, theta)
        if verdict is False:
            detail = "; ".join(explain_wellformed(current, mode, theta)) or "ill-formed"
            findings.append(Finding("<system>", None, path,
                                    f"well-formedness lost after {len(path)} step(s): {detail}"))
        elif verdict is None:
            findings.append(Finding("<system>", None, path,
                                    "well-formedness inconclusive (bound exceeded)",
                                    inconclusive=True))
        if len(path) >= depth:
            continue
        for succ, event in step(current, mode):
            key = system_key(succ)
            if key not in seen:
                seen.add(key)
                queue.append((succ, path + (_event_shorthand(event),)))
    return Report(tuple(findings))


def _event_shorthand(e: Event) -> str:
    if isinstance(e, LocalAction):
        return f"{e.site}:{e.action}"
    return f"{e.source}>{e.target}"
