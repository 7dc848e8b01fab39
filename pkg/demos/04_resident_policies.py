"""Resident policies: constraining the coalition, not the individual.

A licence server with K licences cannot express "K total" as an entry
policy (each arrival would get K). Dynamic membranes make the policy a
decreasing budget: each admission pays the incoming agent's usage out of
it, and the record of original policies keeps well-formedness checkable.
Run from the repository root:

    python3 demos/04_resident_policies.py
"""
from pathlib import Path

from membranes import (
    parse_system, parse_theta, run, verify_safety, verify_subject_reduction,
    wellformed_resident,
)
from membranes.runtime import Migration, Mode

HERE = Path(__file__).parent


def main():
    system = parse_system((HERE / "licence_server.mem").read_text(), "multiset")
    theta = parse_theta((HERE / "licence_server.theta").read_text())
    mode = Mode.of("multiset", "dynamic")

    print("Original resident policies (the external record):")
    for site, policy in sorted(theta.items()):
        print(f"  {site}: {policy}")
    print(f"well-formed under the record: {wellformed_resident(system, theta)}")

    print("\nThree clients race for two licences:")
    events, final = run(system, mode, 50, seed=1)
    for event in events:
        print("  " + event.render())

    admitted = sum(1 for e in events if isinstance(e, Migration) and e.admitted)
    print(f"\nadmitted: {admitted}; remaining budget at the server: "
          f"{final.get('licence_serv').membrane.policy}")

    print("\nBounded verification of the soundness theorems on this system:")
    preservation = verify_subject_reduction(system, mode, depth=5, theta=theta)
    safety = verify_safety(system, mode, depth=5, theta=theta)
    print(f"  subject reduction: {preservation.render().splitlines()[-1]}")
    print(f"  safety:            {safety.render().splitlines()[-1]}")


if __name__ == "__main__":
    main()
