"""Entry policies as label sets, and how far trust takes you.

Walks through the lying-digest attack: a site that trusts its neighbours
checks only the digests they profess, so a false digest walks straight
through the membrane. Run from the repository root:

    python3 demos/01_entry_policies.py
"""
from pathlib import Path

from membranes import (
    coherent, parse_system, run, verify_safety, wellformed_set,
)
from membranes.policy_set import explain_wellformed_set
from membranes.runtime import Migration, Mode

HERE = Path(__file__).parent


def main():
    system = parse_system((HERE / "example1_attack.mem").read_text(), "set")
    mode = Mode.of("set")

    print("The system is coherent (trust knowledge is internally consistent):")
    print(" ", coherent(system))

    print("\nBut it is not well-formed; the trusted sites host lying agents:")
    print(" ", wellformed_set(system))
    for line in explain_wellformed_set(system):
        print("   -", line)

    print("\nRunning it anyway. Watch the digests sail through the membranes:")
    events, final = run(system, mode, 20, seed=3)
    for event in events:
        print("  " + event.render())

    admitted = [e for e in events if isinstance(e, Migration) and e.admitted]
    print(f"\nAdmitted migrations: {len(admitted)}. Forbidden `take` actions ran"
          "\nat home and at secure. Stepping to the moment both agents have"
          "\nlanded (but not yet fired) and checking safety there:")
    foiled = _state_with_takes_pending(system, mode)
    report = verify_safety(foiled, mode, depth=6)
    for line in report.render().splitlines():
        print("   ", line)


def _state_with_takes_pending(system, mode):
    from membranes import Act, NIL, normalize, step
    take = Act("take", NIL)
    seen, frontier = {system}, [system]
    for _ in range(6):
        nxt = []
        for current in frontier:
            for succ, _ in step(current, mode):
                if succ in seen:
                    continue
                seen.add(succ)
                nxt.append(succ)
                if (normalize(succ.get("home").agent) == take
                        and normalize(succ.get("secure").agent) == take):
                    return succ
        frontier = nxt
    raise AssertionError("attack state not reached")


if __name__ == "__main__":
    main()
