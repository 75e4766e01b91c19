"""Walkthrough: exact density profiles and window bounds.

Run:  python3 demos/density_profiles.py
"""

from fractions import Fraction

from cedensity import (SetOracle, density_profile, dyadic_class,
                       residue_union_density, rho)


def main():
    # Prefix density is always an exact rational |S ∩ [0,n)| / n.
    evens = SetOracle.residue_union(2, [0])
    print("rho(evens, 10) =", rho(evens, 10))
    print("rho(evens, 7)  =", rho(evens, 7))

    # The dyadic class k = {m : m % 2^(k+1) == 2^k} has density 2^-(k+1),
    # exact at every multiple of the period.
    for k in range(4):
        prof = density_profile(dyadic_class(k), 1 << 12)
        period = 1 << (k + 1)
        assert prof.rho(1 << 12) == Fraction(1, period)
        print(f"class {k}: density {prof.rho(1 << 12)} "
              f"(count {prof.count(1 << 12)} below 2^12)")

    # Window bounds are estimators on [lo, hi] — min and max of the exact
    # prefix densities, never a limit claim.
    prof = density_profile(evens, 100)
    lo, hi = prof.window_bounds(2, 100)
    print("evens on [2, 100]: min", lo, "max", hi)

    # Unions of residue classes have density |residues| / modulus.
    print("density of {0,1} mod 4:", residue_union_density(4, [0, 1]))


if __name__ == "__main__":
    main()
