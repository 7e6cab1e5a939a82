"""Reference values frozen into the test suite, computed without contract_lens.

Every number here comes from a closed form, scipy quadrature or root finding
written directly against the formulas, so the tests compare the package with
an implementation that shares no code with it.

    python3 scripts/derive_oracles.py
"""
from __future__ import annotations

import math

from scipy import integrate, optimize

MBPS = 1e6 / 8


def utility_differences():
    # exponential: rate = 2 exp(-s / 0.5), inverse s = -0.5 ln(x / 2)
    exp_inv = lambda x: -0.5 * math.log(x / 2.0)
    # shifted power: rate = 0.1 + 1.5 (s - 0.2)^-0.7, inverse s = 0.2 + ((x - 0.1) / 1.5)^(-1/0.7)
    pow_inv = lambda x: 0.2 + ((x - 0.1) / 1.5) ** (-1.0 / 0.7)
    # linear: rate = 3 (1 - s / 4), inverse s = 4 (1 - x / 3)
    lin_inv = lambda x: 4.0 * (1.0 - x / 3.0)
    # logarithmic: rate = 2 ln(5 / s), inverse s = 5 exp(-x / 2)
    log_inv = lambda x: 5.0 * math.exp(-x / 2.0)
    return {
        "exponential": integrate.quad(exp_inv, 0.2, 1.5, epsabs=1e-13, epsrel=1e-13)[0],
        "shifted_power": integrate.quad(pow_inv, 0.5, 3.0, epsabs=1e-13, epsrel=1e-13)[0],
        "linear": integrate.quad(lin_inv, 0.5, 2.5, epsabs=1e-13, epsrel=1e-13)[0],
        "logarithmic": integrate.quad(log_inv, 0.4, 3.0, epsabs=1e-13, epsrel=1e-13)[0],
    }


def shifted_parking_ratio(b: float, s_min: float = 1.0, s_max: float = 200.0, k: int = 2) -> float:
    """Worst short/long ratio for rate 1/(s - b): long flow sees k*s."""
    ratio = lambda s: (k * s - b) / (s - b)
    grid = [s_min + (s_max - s_min) * i / 20000 for i in range(20001)]
    return max(ratio(s) for s in grid)


def parking_fixed_point(rate, k: int, capacity: float, lo: float, hi: float):
    s = optimize.brentq(lambda s: rate(s) + rate(k * s) - capacity, lo, hi, xtol=1e-15, rtol=1e-15)
    return s, rate(s), rate(k * s)


def main():
    print("utility differences:")
    for name, v in utility_differences().items():
        print(f"  {name}: {v!r}")
    print("shifted 1/(s-b) parking-lot ratio, k=2, domain [1, 200]:")
    for b in (0.9, 0.99, 0.999, -0.5):
        print(f"  b={b}: {shifted_parking_ratio(b)!r}")
    print("fixed point 1/s, k=3, capacity 0.05:", parking_fixed_point(lambda s: 1 / s, 3, 0.05, 1.0, 1e3))
    print("fixed point e^-s, sum, k=2, capacity 0.5:",
          parking_fixed_point(lambda s: math.exp(-s), 2, 0.5, 0.1, 5.0))

    cap, rtprop, pkt = 100 * MBPS, 10_000_000, 1500
    ser = pkt * 1e9 / cap
    print("serialization ns at 100 Mbps:", ser)
    # 1/s contract with rate 2C at s = 0.1 rtprop: one flow settles where 2C s_min / s = C
    print("canonical single-flow delay:", 2 * 0.1 * rtprop)
    # vegas: alpha packets queued at the bottleneck
    print("vegas single-flow queueing delay:", 2 * ser)
    # standing queue of q packets
    print("standing queue of 5 packets:", 5 * ser)
    # ecn 1/sqrt(s): (C/2) (s/0.002)^-0.5 = C/n
    for n in (2, 4, 8):
        print(f"ecn fixed point n={n}:", 0.002 * n * n / 4)


if __name__ == "__main__":
    main()
