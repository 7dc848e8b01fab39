"""Multiset policies: labels carry occurrence counts, with `w` (omega)
marking a permanently available label. Enforcement is multiset inclusion;
conformance consumes budget, so two one-shot threads jointly need a count
of two. Includes the minimal-policy inference used by resident membranes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Iterable, Mapping

from .core import (
    Act, Agent, Go, Nil, Par, PolicyRegime, Repl, System, is_trustworthy,
    threads,
)


class _Omega:
    """The count of a permanent resource; absorbs addition and subtraction."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "w"


OMEGA = _Omega()
Count = int | _Omega


def count_le(a, b) -> bool:
    if b is OMEGA:
        return True
    if a is OMEGA:
        return False
    return a <= b


def count_add(a, b):
    if a is OMEGA or b is OMEGA:
        return OMEGA
    return a + b


def count_sub(a, b):
    """a - b for counts, defined only when b <= a; omega minus anything is omega."""
    if a is OMEGA:
        return OMEGA
    if b is OMEGA or b > a:
        raise ValueError(f"cannot take {b} occurrences out of {a}")
    return a - b


@dataclass(frozen=True)
class MultisetPolicy:
    """A finite map from labels to positive counts or omega; zero counts are never stored."""

    items: tuple[tuple[str, "int | _Omega"], ...]
    regime: ClassVar[PolicyRegime] = PolicyRegime.MULTISET

    @classmethod
    def of(cls, counts: Mapping[str, "int | _Omega"] | Iterable[tuple[str, "int | _Omega"]] = ()) -> "MultisetPolicy":
        pairs = counts.items() if isinstance(counts, Mapping) else counts
        kept = {}
        for label, count in pairs:
            if count is OMEGA:
                kept[label] = OMEGA
            elif isinstance(count, int) and count > 0:
                kept[label] = count
            elif count == 0:
                continue
            else:
                raise ValueError(f"count for '{label}' must be a positive int or omega, got {count!r}")
        return cls(tuple(sorted(kept.items())))

    def count(self, label: str):
        for name, c in self.items:
            if name == label:
                return c
        return 0

    def labels(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.items)

    def omega_closure(self) -> "MultisetPolicy":
        """Every present label raised to omega (the E-to-the-omega operation)."""
        return MultisetPolicy(tuple((name, OMEGA) for name, _ in self.items))

    def __str__(self) -> str:
        def fmt(name, c):
            if c == 1:
                return name
            return f"{name}^{'w' if c is OMEGA else c}"
        return "{" + ", ".join(fmt(n, c) for n, c in self.items) + "}"

    def sort_key(self) -> tuple:
        return ("multiset", tuple((n, -1 if c is OMEGA else c) for n, c in self.items))


EMPTY_MULTISET = MultisetPolicy(())


def enforces_multiset(t1: MultisetPolicy, t2: MultisetPolicy) -> bool:
    """Multiset inclusion: every count in t1 fits within t2's count (omega is top)."""
    return all(count_le(c, t2.count(name)) for name, c in t1.items)


def join(t1: MultisetPolicy, t2: MultisetPolicy) -> MultisetPolicy:
    """Pointwise sum of counts, omega absorbing.

    This is the policy-combination operator: additivity is what makes two
    threads that each send once jointly demand a count of two, and what
    lets dynamic membranes do budget arithmetic.
    """
    out = dict(t1.items)
    for name, c in t2.items:
        out[name] = count_add(out.get(name, 0), c)
    return MultisetPolicy.of(out)


def subtract(t: MultisetPolicy, used: MultisetPolicy) -> MultisetPolicy:
    """The largest remainder r with join(r, used) == t; omega entries stay omega.

    Raises ValueError unless used is within t (callers check enforces first).
    """
    if not enforces_multiset(used, t):
        raise ValueError(f"{used} does not fit within {t}")
    out = {}
    for name, c in t.items:
        if c is OMEGA:
            out[name] = OMEGA
        else:
            out[name] = c - used.count(name)
    return MultisetPolicy.of(out)


def infer_policy(p: Agent) -> MultisetPolicy | None:
    """The unique minimal policy an agent satisfies, or None when no policy exists.

    No policy exists exactly when some migration's professed digest is
    smaller than what its continuation actually uses. A replicated body's
    usage is iterated arbitrarily, so its labels are raised to omega.
    """
    if isinstance(p, Nil):
        return EMPTY_MULTISET
    if isinstance(p, Act):
        t = infer_policy(p.cont)
        return None if t is None else join(t, MultisetPolicy.of({p.action: 1}))
    if isinstance(p, Go):
        if not isinstance(p.digest, MultisetPolicy):
            return None
        inner = infer_policy(p.cont)
        if inner is None or not enforces_multiset(inner, p.digest):
            return None
        return MultisetPolicy.of({p.target: 1})
    if isinstance(p, Par):
        t1 = infer_policy(p.left)
        t2 = infer_policy(p.right)
        return None if t1 is None or t2 is None else join(t1, t2)
    if isinstance(p, Repl):
        t = infer_policy(p.body)
        return None if t is None else t.omega_closure()
    raise TypeError(f"not an agent: {p!r}")


def typecheck_multiset(p: Agent, t: MultisetPolicy) -> bool:
    """Whether agent p conforms to budget t.

    Decided via inference: the inferred policy is the minimal derivable
    one and conformance is upward closed, so p conforms to t exactly when
    inference succeeds and its result fits within t. This sidesteps
    searching budget splits across parallel threads.
    """
    inferred = infer_policy(p)
    return inferred is not None and enforces_multiset(inferred, t)


def wellformed_multiset(n: System) -> bool:
    """Each thread at each trustworthy site conforms to the site's entry policy.

    Thread-wise on purpose: an entry policy constrains single agents, and
    k admitted agents may jointly use k times the budget.
    Precondition: n is coherent.
    """
    return not explain_wellformed_multiset(n)


def explain_wellformed_multiset(n: System) -> list[str]:
    failures = []
    for site in n:
        if not is_trustworthy(site):
            continue
        policy = site.membrane.policy
        if not isinstance(policy, MultisetPolicy):
            failures.append(f"{site.name}: membrane policy is not a multiset policy")
            continue
        for i, thread in enumerate(threads(site.agent)):
            inferred = infer_policy(thread)
            if inferred is None:
                failures.append(f"{site.name}: thread {i} has an invalid digest")
            elif not enforces_multiset(inferred, policy):
                failures.append(f"{site.name}: thread {i} uses {inferred}, exceeding {policy}")
    return failures


def wellformed_static(n: System) -> bool:
    """Joint resident usage at each trustworthy site fits the membrane policy.

    This is the invariant maintained by static resident membranes, which
    re-infer the resident code's minimal policy at every admission.
    Precondition: n is coherent.
    """
    return not explain_wellformed_static(n)


def explain_wellformed_static(n: System) -> list[str]:
    failures = []
    for site in n:
        if not is_trustworthy(site):
            continue
        policy = site.membrane.policy
        if not isinstance(policy, MultisetPolicy):
            failures.append(f"{site.name}: membrane policy is not a multiset policy")
            continue
        inferred = infer_policy(site.agent)
        if inferred is None:
            failures.append(f"{site.name}: resident code has an invalid digest")
        elif not enforces_multiset(inferred, policy):
            failures.append(f"{site.name}: resident code uses {inferred}, exceeding {policy}")
    return failures


# Resident record: the external map from trustworthy sites to their original
# resident policies, against which dynamic membranes are judged.
ResidentRecord = dict[str, MultisetPolicy]


def wellformed_resident(n: System, theta: Mapping[str, MultisetPolicy]) -> bool:
    """Resident well-formedness under a record of original policies.

    Per trustworthy site: the resident code's inferred usage plus what the
    membrane still offers must fit the site's original budget theta[site].
    Precondition: n is coherent and theta covers every trustworthy site.
    """
    return not explain_wellformed_resident(n, theta)


def explain_wellformed_resident(n: System, theta: Mapping[str, MultisetPolicy]) -> list[str]:
    failures = []
    for site in n:
        if not is_trustworthy(site):
            continue
        policy = site.membrane.policy
        if not isinstance(policy, MultisetPolicy):
            failures.append(f"{site.name}: membrane policy is not a multiset policy")
            continue
        if site.name not in theta:
            raise ValueError(f"resident record does not cover trustworthy site '{site.name}'")
        inferred = infer_policy(site.agent)
        if inferred is None:
            failures.append(f"{site.name}: resident code has an invalid digest")
            continue
        combined = join(inferred, policy)
        if not enforces_multiset(combined, theta[site.name]):
            failures.append(
                f"{site.name}: resident usage plus remaining budget is {combined}, "
                f"exceeding the original {theta[site.name]}")
    return failures
