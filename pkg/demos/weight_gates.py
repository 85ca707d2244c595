"""A2 constants and exponent fits for power weights t^alpha.

Run with ``python3 demos/weight_gates.py``.
"""
from nonlocal_helmholtz.bernstein import WeightProfile, a2_check, asymptotic_exponent_fit

if __name__ == "__main__":
    print(f"{'alpha':>6} {'A2':>5} {'constant':>10} {'fit':>8} {'exponent ok':>11}")
    for alpha in (-1.5, -1.0, -0.9, -0.5, 0.0, 0.5, 0.9, 1.0, 1.5):
        w = WeightProfile.power(alpha)
        rep = a2_check(w)
        fit = asymptotic_exponent_fit(w)
        const = f"{rep.constant:10.4f}" if rep.passed else f"{'inf':>10}"
        print(f"{alpha:6.2f} {('pass' if rep.passed else 'fail'):>5} {const} {fit.alpha:8.4f} {str(fit.passed):>11}")
