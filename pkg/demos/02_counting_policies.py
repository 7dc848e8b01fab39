"""Entry policies as multisets: bounding how often, not just what.

The spamming virus !send.nil conforms to any label-set policy that allows
send at all, but a count send^K stops it: a replicated body demands
send^w. Run from the repository root:

    python3 demos/02_counting_policies.py
"""
from pathlib import Path

from membranes import (
    Act, MultisetPolicy, NIL, OMEGA, Repl, SetPolicy, infer_policy,
    parse_system, run, typecheck_multiset, typecheck_set,
)
from membranes.runtime import Mode

HERE = Path(__file__).parent


def main():
    spam = Repl(Act("send", NIL))

    mail_set = SetPolicy.of(["list", "send", "retr", "del", "reset", "quit"])
    print(f"set policy {mail_set}:")
    print(f"  !send.nil conforms: {typecheck_set(spam, mail_set)}  (sets cannot count)")

    for k in (1, 3, 10):
        capped = MultisetPolicy.of({"send": k})
        print(f"multiset policy {capped}: conforms {typecheck_multiset(spam, capped)}")
    unbounded = MultisetPolicy.of({"send": OMEGA})
    print(f"multiset policy {unbounded}: conforms {typecheck_multiset(spam, unbounded)}")

    print(f"\nThe minimal policy of !send.nil is {infer_policy(spam)} -- the"
          "\nreplication shows up as an omega count, which finite budgets reject.")

    print("\nThe shipped mail server demo bounces the virus at the membrane:")
    system = parse_system((HERE / "mail_server.mem").read_text(), "multiset")
    events, _ = run(system, Mode.of("multiset"), 10, seed=0)
    for event in events:
        print("  " + event.render())


if __name__ == "__main__":
    main()
