"""Walkthrough: finite-stage constructions against deciders and streams.

Run:  python3 demos/stage_constructions.py
"""

from fractions import Fraction

from cedensity import CEStream, SetOracle
from cedensity.prioritysim import (JumpApprox, PartialDecider,
                                   audit_permissions, permitted_interval_build,
                                   ratio_interval_build,
                                   restraint_witness_build)


def main():
    # Exact-ratio intervals: each requirement appoints an interval [a, c]
    # whose inner segment [a, b] enters the built set immediately; if the
    # decider answers 1 inside the withheld gap, the least such witness is
    # kept out of the set forever.
    deciders = [PartialDecider.constant(1, 0, label="one"),
                PartialDecider.parity(1, label="parity"),
                PartialDecider.never()]
    stream, intervals, trace = ratio_interval_build(deciders, 4000, 4000)
    for e, out in trace.outcomes.items():
        states = [iv["state"] for iv in out["intervals"]]
        print(f"decider {e} ({deciders[e].label}): intervals {states}")
    first = trace.outcomes[0]["intervals"][0]
    print("finalized witness for the always-1 decider:", first["witness"])

    # Restrained intervals: with a quiet opposing stream, the final
    # restrained interval pins the built set's density strictly below 3/4.
    quiet = CEStream.from_oracle(SetOracle.empty(), n_max=4000,
                                 stage_max=4000)
    stream, trace = restraint_witness_build([quiet], 4000, 4000)
    out = trace.outcomes[0]
    rho_m = Fraction(out["rho_m_num"], out["rho_m_den"])
    print("final interval:", out["final_interval"], "rho_m(A) =", rho_m,
          "< 3/4:", rho_m < Fraction(3, 4))

    # Permitting: enumerations happen only at an element's own stage or on
    # a recorded change y <= x in the permitting stream — auditable from
    # the trace alone.
    C = CEStream.from_oracle(SetOracle.naturals(), n_max=4000,
                             stage_max=4000)
    W = CEStream.from_oracle(SetOracle.residue_union(2, [0]), n_max=4000,
                             stage_max=4000)
    jump = JumpApprox(lambda i, s: 1 if s >= 4 else 0,
                      lambda i, s: 12 if s >= 4 else None)
    _a, _g, ptrace = permitted_interval_build(C, jump, [W], 4000, 4000,
                                              pairs=[(0, 0)])
    print("pair (0,0) outcome:", ptrace.outcomes["(0, 0)"]["case"])
    print("every enumeration carried a permission:",
          audit_permissions(ptrace))


if __name__ == "__main__":
    main()
