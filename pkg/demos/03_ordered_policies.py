"""Entry policies as automata: the order of actions matters.

A mail server can demand authentication before commands and a clean quit;
a locking discipline can demand every lock be unlocked; a secrecy policy
can confine agents that saw a secret. Conformance compares the agent's
trace language (a shuffle expression) with the automaton's language.
Run from the repository root:

    python3 demos/03_ordered_policies.py
"""
from pathlib import Path

from membranes import (
    Act, DfaPolicy, Go, NIL, cre_of, parse_dfa_bundle, parse_system,
    satisfies_dfa, run, wellformed_dfa,
)
from membranes.runtime import Mode

HERE = Path(__file__).parent


def show(check):
    if check.verdict == "no":
        return f"no (counterexample: '{' '.join(check.counterexample)}')"
    return check.verdict


def main():
    bundle = parse_dfa_bundle((HERE / "protocols.dfa").read_text())

    session = Act("usr", Act("pwd", Act("quit", NIL)))
    print("mail policy usr.pwd.(commands)*.quit:")
    print(f"  usr.pwd.quit.nil          -> {show(satisfies_dfa(session, bundle['mail']))}")
    rude = Act("send", NIL)
    print(f"  send.nil (no login)       -> {show(satisfies_dfa(rude, bundle['mail']))}")

    print("\nlocking policy (every lock followed by an unlock):")
    tidy = Act("lock", Act("work", Act("unlock", NIL)))
    print(f"  lock.work.unlock.nil      -> {show(satisfies_dfa(tidy, bundle['locking']))}")
    sloppy = Act("lock", NIL)
    print(f"  lock.nil                  -> {show(satisfies_dfa(sloppy, bundle['locking']))}")

    print("\nsecrecy policy (after secret, never migrate):")
    secrecy = DfaPolicy("secrecy", bundle["secrecy"])
    stays = Act("secret", Act("work", NIL))
    print(f"  secret.work.nil           -> {show(satisfies_dfa(stays, bundle['secrecy']))}")
    flees = Act("secret", Go("elsewhere", secrecy, NIL))
    print(f"  secret.go(elsewhere,...)  -> {show(satisfies_dfa(flees, bundle['secrecy']))}")
    print(f"  (its trace expression is {cre_of(flees)}: migration shows up"
          "\n   as the target's name, which the policy forbids after secret)")

    print("\nThe shipped mail protocol system is well-formed and runs clean:")
    system = parse_system((HERE / "mail_protocol.mem").read_text(), "dfa", dfas=bundle)
    print(f"  well-formed: {wellformed_dfa(system)}")
    events, _ = run(system, Mode.of("dfa"), 10, seed=0)
    for event in events:
        print("  " + event.render())


if __name__ == "__main__":
    main()
