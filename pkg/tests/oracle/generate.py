"""Independent oracle for the frozen reference values in ``values.json``.

Uses exact rationals and mpmath quadrature only; nothing here imports toeplab.
Regenerate with ``python tests/oracle/generate.py`` (needs mpmath).
"""

import json
from fractions import Fraction
from pathlib import Path

import mpmath as mp

mp.mp.dps = 30
OUT = Path(__file__).with_name("values.json")


def radius(k):
    return Fraction(2**k - 1, 2**k + 1)


def defect(k):
    return 1 - radius(k) ** 2


def tent_average(func, k):
    """Average over the generation-k tent of a radial function of t = 1 - |z|^2."""
    hi = mp.mpf(defect(k).numerator) / defect(k).denominator
    # t = hi * v**20 smooths the t**(-b) endpoint singularity
    n = 20
    return mp.quad(lambda v: func(hi * v**n) * n * v ** (n - 1), [0, 1])


def b2_power(b, k):
    return tent_average(lambda t: t ** (-b), k) * tent_average(lambda t: t**b, k)


def rh_power(b, r, k):
    return tent_average(lambda t: t ** (-b * r), k) ** (1 / mp.mpf(r)) / tent_average(lambda t: t ** (-b), k)


def binf_power(b, k):
    """(1/sigma(K^)) int_{K^} M(sigma chi), M on layer j = average over the generation-j tent."""
    avg = lambda j: tent_average(lambda t: t ** (-b), j)
    x = lambda j: mp.mpf(defect(j).numerator) / defect(j).denominator
    head = mp.fsum((x(j) - x(j + 1)) / x(k) * avg(j) for j in range(k, k + 40))
    # beyond 40 layers x_j ~ 4 * 2^-j, so the summand is geometric with ratio 2^(b-1)
    q = mp.mpf(2) ** (b - 1)
    last = (x(k + 39) - x(k + 40)) / x(k) * avg(k + 39)
    return (head + last * q / (1 - q)) / avg(k)


def berezin_radial(func, x):
    """<T_u k_z, k_z> for radial u(|w|^2) at |z|^2 = x by polar quadrature of u(|phi_z(w)|^2)."""
    z = mp.sqrt(x)

    def integrand(rho, t):
        w = rho * mp.expj(t)
        phi = (z - w) / (1 - z * mp.conj(w))
        return func(abs(phi) ** 2) * rho / mp.pi

    return mp.quad(integrand, [0, 0.5, 0.9, 1], [0, mp.pi / 2, mp.pi, 3 * mp.pi / 2, 2 * mp.pi])


def carleson_lens(r):
    """Normalized area of {|w| < 1, |w - 1| < 1 - r} by radial slicing."""
    h = 1 - mp.mpf(r)
    half_angle = lambda rho: mp.acos((rho**2 + 1 - h**2) / (2 * rho))
    return mp.quad(lambda rho: 2 * rho * half_angle(rho), [1 - h, 1]) / mp.pi


def cphi(rp, rho, C, power_proxy=True):
    r = mp.mpf(rp) / (rp - 1)
    kappa = (1 - 1 / r) * r ** (-1 / (r - 1))
    scale = 1 if power_proxy else kappa ** (1 / mp.mpf(rp))
    return 1 + scale * mp.nsum(lambda k: rho ** (C**k / mp.mpf(rp)), [1, mp.inf])


def f(v):
    return float(v) if not isinstance(v, Fraction) else float(v)


def main():
    G = 12
    out = {
        "radius": [f(radius(k)) for k in range(G + 2)],
        "tent_measure": [f(defect(k)) for k in range(G + 2)],
        "kube_measure": [f(defect(k) - defect(k + 1)) for k in range(G + 1)],
        "rho": f(1 - (defect(0) - defect(1)) / defect(0)),
        "alpha_G12": f(Fraction((2**13 + 1) ** 2, (2**12 + 1) ** 2)),
        "alpha_k0": f(defect(0) / defect(1)),
        "b2_power": {str(b): [float(b2_power(mp.mpf(b), k)) for k in (0, 3, 8)] for b in ("0.1", "0.5", "0.9")},
        "rh_half_1.5": [float(rh_power(mp.mpf("0.5"), mp.mpf("1.5"), k)) for k in (0, 4, 10)],
        "binf_power": {str(b): float(binf_power(mp.mpf(b), 0)) for b in ("0.1", "0.5", "0.9")},
        "c_sigma_half_G12": float(mp.sqrt(mp.mpf(defect(12).numerator) / defect(12).denominator
                                          / (mp.mpf(defect(13).numerator) / defect(13).denominator))),
        "berezin_modsq_half": float(berezin_radial(lambda s: s, mp.mpf("0.5"))),
        "berezin_modsq_quarter": float(berezin_radial(lambda s: s, mp.mpf("0.25"))),
        "berezin_vanishing1_half": float(berezin_radial(lambda s: 1 - s, mp.mpf("0.5"))),
        "carleson_lens": {str(r): float(carleson_lens(r)) for r in ("0.5", "0.9", "0.99")},
        "cphi": {str(rp): float(cphi(rp, mp.mpf(8) / 9, mp.mpf("1.05"))) for rp in (2, 10, 100, 1000)},
        "cphi_exact": {str(rp): float(cphi(rp, mp.mpf(8) / 9, mp.mpf("1.05"), False)) for rp in (2, 10, 100, 1000)},
        "extrapolation_theta_p2_r1.1": f(Fraction(1, 21)),
        "weak_bound_unit": float(mp.log(mp.e + 1)),
        "norm_kernel_half_at_0": 0.75,
    }
    OUT.write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
