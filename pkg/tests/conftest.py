"""Seeded random generators for agents, policies, and well-formed systems.

Acceptance criteria fix sample counts, so these are plain random.Random
generators rather than hypothesis strategies; property tests that only
need "lots of inputs" use hypothesis directly in their own modules.
"""
from __future__ import annotations

import random
from pathlib import Path

import pytest

from membranes import (
    Act, Agent, Dfa, DfaPolicy, Go, Membrane, MultisetPolicy, NIL, OMEGA,
    Par, Repl, SetPolicy, Site, System, TrustLevel, infer_policy, minimize,
    par,
)

DEMOS = Path(__file__).resolve().parent.parent / "demos"

ACTIONS = ["ping", "send", "log"]
SITES = ["alpha", "beta", "gamma"]


# ---------------------------------------------------------------------------
# Agents


def random_multiset_agent(rng: random.Random, size: int, depth: int = 0) -> Agent:
    """An agent of at most `size` nodes whose digests are all valid
    (each digest is the continuation's inferred policy, sometimes padded)."""
    if size <= 1:
        return NIL if rng.random() < 0.4 else Act(rng.choice(ACTIONS), NIL)
    kind = rng.random()
    if kind < 0.35:
        return Act(rng.choice(ACTIONS), random_multiset_agent(rng, size - 1, depth))
    if kind < 0.5 and depth < 2:
        cont = random_multiset_agent(rng, size - 2, depth + 1)
        digest = infer_policy(cont)
        assert digest is not None
        if rng.random() < 0.3:
            digest = MultisetPolicy.of({**dict(digest.items), rng.choice(ACTIONS): OMEGA})
        return Go(rng.choice(SITES), digest, cont)
    if kind < 0.75:
        split = rng.randint(1, size - 1)
        return Par(random_multiset_agent(rng, split, depth),
                   random_multiset_agent(rng, size - split, depth))
    if kind < 0.85 and depth < 2:
        return Repl(random_multiset_agent(rng, size - 1, depth + 1))
    return Act(rng.choice(ACTIONS), random_multiset_agent(rng, size - 1, depth))


def random_multiset_policy(rng: random.Random, max_count: int = 3) -> MultisetPolicy:
    counts = {}
    for label in ACTIONS + SITES:
        if rng.random() < 0.4:
            counts[label] = OMEGA if rng.random() < 0.2 else rng.randint(1, max_count)
    return MultisetPolicy.of(counts)


def required_set(p: Agent) -> set[str]:
    """The labels an agent needs from a set policy (digests handled inside go)."""
    if isinstance(p, Act):
        return {p.action} | required_set(p.cont)
    if isinstance(p, Go):
        return {p.target}
    if isinstance(p, Par):
        return required_set(p.left) | required_set(p.right)
    if isinstance(p, Repl):
        return required_set(p.body)
    return set()


def random_set_agent(rng: random.Random, size: int, depth: int = 0) -> Agent:
    if size <= 1:
        return NIL if rng.random() < 0.4 else Act(rng.choice(ACTIONS), NIL)
    kind = rng.random()
    if kind < 0.35:
        return Act(rng.choice(ACTIONS), random_set_agent(rng, size - 1, depth))
    if kind < 0.5 and depth < 2:
        cont = random_set_agent(rng, size - 2, depth + 1)
        labels = required_set(cont)
        if rng.random() < 0.3:
            labels.add(rng.choice(ACTIONS))
        return Go(rng.choice(SITES), SetPolicy.of(labels), cont)
    if kind < 0.75:
        split = rng.randint(1, size - 1)
        return Par(random_set_agent(rng, split, depth),
                   random_set_agent(rng, size - split, depth))
    if kind < 0.85 and depth < 2:
        return Repl(random_set_agent(rng, size - 1, depth + 1))
    return Act(rng.choice(ACTIONS), random_set_agent(rng, size - 1, depth))


# ---------------------------------------------------------------------------
# Trust maps that keep generated systems coherent


def _coherent_trust(rng: random.Random, names: list[str], good: dict[str, bool], me: str):
    trust = {me: TrustLevel.LGOOD if good[me] else TrustLevel.LBAD}
    for other in names:
        if other == me or rng.random() < 0.4:
            continue
        if good[other]:
            trust[other] = rng.choice([TrustLevel.LGOOD, TrustLevel.LOC])
        else:
            trust[other] = rng.choice([TrustLevel.LBAD, TrustLevel.LOC])
    return trust


def _pick_sites(rng: random.Random):
    names = SITES[: rng.randint(1, 3)]
    good = {name: rng.random() < 0.8 for name in names}
    if not any(good.values()):
        good[names[0]] = True
    return names, good


# ---------------------------------------------------------------------------
# Well-formed systems per regime/membrane combination


def gen_set_system(rng: random.Random) -> System:
    names, good = _pick_sites(rng)
    sites = []
    for name in names:
        agent = random_set_agent(rng, rng.randint(1, 6))
        labels = required_set(agent)
        if rng.random() < 0.5:
            labels.add(rng.choice(ACTIONS))
        sites.append(Site(name, Membrane.of(_coherent_trust(rng, names, good, name),
                                            SetPolicy.of(labels)), agent))
    return System.of(*sites)


def gen_multiset_system(rng: random.Random) -> System:
    from membranes import join, threads
    names, good = _pick_sites(rng)
    sites = []
    for name in names:
        agent = random_multiset_agent(rng, rng.randint(1, 6))
        counts: dict = {}
        for thread in threads(agent):
            usage = infer_policy(thread)
            for label, c in usage.items:
                prev = counts.get(label, 0)
                if c is OMEGA or prev is OMEGA:
                    counts[label] = OMEGA
                elif c > prev:
                    counts[label] = c
        policy = join(MultisetPolicy.of(counts), random_multiset_policy(rng)) \
            if rng.random() < 0.5 else MultisetPolicy.of(counts)
        sites.append(Site(name, Membrane.of(_coherent_trust(rng, names, good, name),
                                            policy), agent))
    return System.of(*sites)


def gen_static_system(rng: random.Random) -> System:
    from membranes import join
    names, good = _pick_sites(rng)
    sites = []
    for name in names:
        agent = random_multiset_agent(rng, rng.randint(1, 6))
        base = infer_policy(agent)
        policy = join(base, random_multiset_policy(rng)) if rng.random() < 0.5 else base
        sites.append(Site(name, Membrane.of(_coherent_trust(rng, names, good, name),
                                            policy), agent))
    return System.of(*sites)


def gen_dynamic_system(rng: random.Random) -> tuple[System, dict[str, MultisetPolicy]]:
    from membranes import join
    from membranes.core import is_trustworthy
    names, good = _pick_sites(rng)
    sites = []
    theta = {}
    for name in names:
        agent = random_multiset_agent(rng, rng.randint(1, 6))
        policy = random_multiset_policy(rng)
        sites.append(Site(name, Membrane.of(_coherent_trust(rng, names, good, name),
                                            policy), agent))
    system = System.of(*sites)
    for site in system:
        if is_trustworthy(site):
            usage = infer_policy(site.agent)
            record = join(usage, site.membrane.policy)
            if rng.random() < 0.5:
                record = join(record, random_multiset_policy(rng))
            theta[site.name] = record
    return system, theta


# DFA-regime systems: threads are walks on the site's own automaton, so
# the suffix condition holds by construction; go continuations are walks
# on the *target's* automaton from its start, with an exact-word digest,
# so migrations genuinely fire during exploration.


def random_policy_dfa(rng: random.Random, localities: list[str]) -> Dfa:
    symbols = ACTIONS[:2] + [l for l in localities if rng.random() < 0.6]
    k = rng.randint(1, 4)
    states = [f"s{i}" for i in range(k)]
    delta = {(s, a): rng.choice(states) for s in states for a in symbols}
    finals = {s for s in states if rng.random() < 0.4}
    if not finals:
        finals = {rng.choice(states)}
    return minimize(Dfa.of(states, symbols, states[0], finals, delta))


def word_dfa(word: tuple[str, ...], alphabet: set[str], name: str) -> DfaPolicy:
    """An automaton accepting exactly the given word."""
    states = [f"w{i}" for i in range(len(word) + 1)] + ["dead"]
    delta = {}
    for s in states:
        for a in alphabet | set(word):
            delta[(s, a)] = "dead"
    for i, a in enumerate(word):
        delta[(f"w{i}", a)] = f"w{i+1}"
    dfa = minimize(Dfa.of(states, alphabet | set(word), "w0", {f"w{len(word)}"}, delta))
    return DfaPolicy(name, dfa)


def _walk_to_final(rng: random.Random, dfa: Dfa, start: str, limit: int = 4,
                   allowed: set[str] | None = None):
    """A random word over `allowed` symbols leading `start` to a final state."""
    symbols = sorted(dfa.alphabet if allowed is None else dfa.alphabet & allowed)
    word = []
    state = start
    for _ in range(limit):
        if state in dfa.finals and (not word or rng.random() < 0.5):
            return tuple(word)
        if not symbols:
            break
        sym = rng.choice(symbols)
        word.append(sym)
        state = dfa.delta[(state, sym)]
    return tuple(word) if state in dfa.finals else None


def _migration_stub(rng: random.Random, dfa: Dfa, me: str, names: list[str]):
    """Find (state, action-word, target) with word+target accepted from state."""
    targets = [t for t in sorted(dfa.alphabet) if t in names and t != me]
    if not targets:
        return None
    options = []
    for state in sorted(dfa.states):
        frontier = [(state, ())]
        seen = {state}
        for _ in range(4):
            nxt = []
            for s, word in frontier:
                for t in targets:
                    if dfa.delta[(s, t)] in dfa.finals:
                        options.append((state, word, t))
                for a in ACTIONS[:2]:
                    if a not in dfa.alphabet:
                        continue
                    s2 = dfa.delta[(s, a)]
                    if s2 not in seen:
                        seen.add(s2)
                        nxt.append((s2, word + (a,)))
            frontier = nxt
    return rng.choice(options) if options else None


def gen_dfa_system(rng: random.Random) -> System:
    names, good = _pick_sites(rng)
    autos = {name: random_policy_dfa(rng, names) for name in names}
    sites = []
    for name in names:
        dfa = autos[name]
        threads: list[Agent] = []

        # one thread that really migrates, when the automaton permits it
        stub = _migration_stub(rng, dfa, name, names) if rng.random() < 0.8 else None
        if stub is not None:
            state, word, target = stub
            payload_word = _walk_to_final(rng, autos[target], autos[target].start, 3,
                                          allowed=set(ACTIONS)) or ()
            digest = word_dfa(payload_word, set(autos[target].alphabet), f"d_{name}")
            agent: Agent = Go(target, digest, _action_chain(payload_word))
            for sym in reversed(word):
                agent = Act(sym, agent)
            threads.append(agent)

        # plus plain local threads: suffix walks on the site's own automaton
        for _ in range(rng.randint(0, 2)):
            state = rng.choice(sorted(dfa.states))
            word = _walk_to_final(rng, dfa, state, allowed=set(ACTIONS))
            if word is not None:
                threads.append(_action_chain(word))
        sites.append(Site(name, Membrane.of(_coherent_trust(rng, names, good, name),
                                            DfaPolicy(f"p_{name}", dfa)), par(*threads)))
    return System.of(*sites)


def _action_chain(word: tuple[str, ...]) -> Agent:
    agent: Agent = NIL
    for sym in reversed(word):
        agent = Act(sym, agent)
    return agent


@pytest.fixture
def rng():
    return random.Random(20260810)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.module.__name__ == "test_acceptance":
        verdict = "PASS" if report.passed else "FAIL"
        print(f"\nACCEPTANCE {verdict}: {item.name}")
