"""Symmetric-difference density profiles on finite windows.

The window minimum/maximum of rho_n(A ^ B) estimate the lower/upper
density of the symmetric difference.  They are estimators only: the
minimum over a finite window bounds no asymptotic quantity, and the
documentation of ``dD_window`` is explicit about that.  In particular,
window minima over a shared window always satisfy the triangle
inequality even though the liminf-based distance famously does not in
the limit; nothing here contradicts that, because no limit is claimed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import DensityProfile, SetOracle, profile_from_bits
from .errors import InvalidWindow


@dataclass
class SymDiffProfile:
    """Profiles of A, B, and A ^ B over a shared window [1, n_max]."""

    a: DensityProfile
    b: DensityProfile
    sym: DensityProfile
    b_subset_of_a: bool  # verified by scan on [0, n_max), never trusted

    @property
    def n_max(self) -> int:
        return self.sym.n_max

    def diff_identity_holds(self, n: int) -> bool:
        """When B ⊆ A was verified, rho_n(sym) == rho_n(A) - rho_n(B)."""
        if not self.b_subset_of_a:
            return False
        return self.sym.count(n) == self.a.count(n) - self.b.count(n)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "rhoA_num", "rhoA_den", "rhoA_float",
                        "rhoB_num", "rhoB_den", "rhoB_float",
                        "rhoSym_num", "rhoSym_den", "rhoSym_float"])
            for n in range(1, self.n_max + 1):
                row = [n]
                for prof in (self.a, self.b, self.sym):
                    r = prof.rho(n)
                    row += [r.numerator, r.denominator, repr(float(r))]
                w.writerow(row)


def symdiff_profile(A: SetOracle, B: SetOracle, n_max: int) -> SymDiffProfile:
    if n_max < 1:
        raise InvalidWindow(f"n_max must be >= 1, got {n_max}")
    ma = A.membership_array(n_max)
    mb = B.membership_array(n_max)
    sym = ma ^ mb
    subset = bool(np.all(ma | ~mb))  # every member of B is a member of A
    return SymDiffProfile(
        a=profile_from_bits(ma, label=A.label),
        b=profile_from_bits(mb, label=B.label),
        sym=profile_from_bits(sym, label=f"({A.label})^({B.label})"),
        b_subset_of_a=subset,
    )


def dD_window(A: SetOracle, B: SetOracle, lo: int, hi: int
              ) -> tuple[Fraction, Fraction]:
    """Window (min, max) of rho_n(A ^ B) over n in [lo, hi].

    Estimators of the lower/upper density of the symmetric difference,
    reported with the window attached by the caller; no limit value is
    certified or claimed.
    """
    prof = symdiff_profile(A, B, hi)
    return prof.sym.window_bounds(lo, hi)
