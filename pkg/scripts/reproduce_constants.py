#!/usr/bin/env python3
"""Derive the optimal allocation constant and check the family identities.

Usage: python scripts/reproduce_constants.py [--tol 1e-8]
"""

import argparse
import math

from onlinecover import allocation
from onlinecover.harness import verify_identities


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--tol", type=float, default=1e-8)
    args = parser.parse_args()

    res = allocation.optimal_k(args.tol)
    print(f"golden-section optimum: k = {res.k:.12f}")
    print(f"coth fixed point:       k = {res.k_coth:.12f}")
    print(f"agreement: {abs(res.k - res.k_coth):.3e}")
    print(f"ratio constant beta = 1 + f_k(0) = {res.beta:.12f}")
    print(f"matching-side constant 1/beta = {1.0 / res.beta:.12f}")
    print(f"one-sided constant 1 + alpha = {1.0 + allocation.ALPHA:.12f} "
          f"(alpha = 1/(e-1) = {allocation.ALPHA:.12f})")
    print(f"coth residual at k: {1.0 / math.tanh(res.k) - res.k:.3e}")
    print()
    ok = verify_identities()
    print("identity suite:", "all ok" if ok else "FAILURES")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
