# SPDX-License-Identifier: Apache-2.0
"""High-precision reference values frozen into tests/unit/oracle_fixtures.hpp.

Independent of the C++ code: mpmath root finding and quadrature at 40 digits.
Run: python3 tests/oracles/compute_oracles.py
"""
import mpmath as mp

mp.mp.dps = 40
PI = mp.pi
KAPPA = 8 * PI  # zeta_0 constant: 1 - e^2 ~ 2 a s^g gives 4 pi * 2a/(4+s) r^(3+s)


def visco_e(a, r):
    """Root of e + a r^(1/5) e^(3/5) = 1 on (0, 1]."""
    if r == 0:
        return mp.mpf(1)
    c = a * mp.power(r, mp.mpf(1) / 5)
    return mp.findroot(lambda e: e + c * mp.power(e, mp.mpf(3) / 5) - 1, (mp.mpf("1e-30"), 1), solver="anderson")


def psi_visco(a, lam, r):
    s = mp.sqrt(r)
    f = lambda z: (1 - visco_e(a, lam * s * z) ** 2) * z ** 3
    return 4 * PI * r ** mp.mpf(1.5) * mp.quad(f, [0, 1])


def m_p(p, theta):
    return mp.power(4 * theta, p / 2) * mp.gamma((3 + p) / 2) / mp.gamma(mp.mpf(3) / 2)


def theta_bar(a, s):
    g = lambda th: 4 * PI * a / (4 + s) * m_p(3 + s, th) - 6
    # closed form: m_p is a power of theta
    p = mp.mpf(3) + s
    base = 6 / (4 * PI * a / (4 + s) * m_p(p, mp.mpf(1)))
    th = mp.power(base, mp.mpf(2) / p)
    assert abs(g(th)) < mp.mpf("1e-30")
    return th


def maxwellian(rho, th):
    return mp.exp(-rho ** 2 / (2 * th)) / (2 * PI * th) ** mp.mpf(1.5)


def phi_c(th):
    node = mp.sqrt(3 * th)
    f = lambda r: 4 * PI * r ** 2 * abs(r ** 2 - 3 * th) * maxwellian(r, th) * (1 + r ** 2)
    return 1 / mp.quad(f, [0, node, mp.inf])


def zeta0(a, s, r2):
    return KAPPA * a / (4 + s) * mp.power(r2, (3 + s) / 2)


def I0(a, s, th, c):
    # centre-of-mass route, |u| ~ chi with scale sqrt(2 theta)
    s2 = 2 * th
    dens = lambda r: mp.sqrt(2 / PI) * r ** 2 / s2 ** mp.mpf(1.5) * mp.exp(-r ** 2 / (2 * s2))
    return c * mp.quad(lambda r: dens(r) * (r ** 2 / 4 - mp.mpf(1.5) * th) * zeta0(a, s, r ** 2), [0, mp.inf])


def energy_phi(th, c):
    f = lambda r: 4 * PI * r ** 4 * c * (r ** 2 - 3 * th) * maxwellian(r, th)
    return mp.quad(f, [0, mp.sqrt(3 * th), mp.inf])


def show(name, x):
    print(f"inline constexpr double {name} = {mp.nstr(x, 20)};")


show("kViscoE_a1_r1", visco_e(1, 1))
show("kViscoE_a1_r32", visco_e(1, 32))
show("kViscoE_a05_r1e4", visco_e(mp.mpf("0.5"), 10000))
show("kPsiVisco_a1_r1", psi_visco(1, 1, 1))
show("kPsiVisco_a1_r4", psi_visco(1, 1, 4))
show("kPsiVisco_a005_lam01_r2", psi_visco(mp.mpf("0.05"), mp.mpf("0.1"), 2))
for label, a, s in [("Const", mp.mpf(1), mp.mpf(0)), ("Visco1", mp.mpf(1), mp.mpf("0.2")), ("Visco005", mp.mpf("0.05"), mp.mpf("0.2"))]:
    th = theta_bar(a, s)
    c = phi_c(th)
    i0 = I0(a, s, th, c)
    ep = energy_phi(th, c)
    assert abs(ep - 6 * c * th ** 2) < mp.mpf("1e-25")
    closed = c * th * (3 + s) / 2 * KAPPA * a / (4 + s) * m_p(3 + s, th)
    assert abs(i0 - closed) < mp.mpf("1e-25") * abs(closed)
    show(f"kThetaBar{label}", th)
    show(f"kPhiC{label}", c)
    show(f"kI0{label}", i0)
    show(f"kEPhi{label}", ep)
    show(f"kMuOverLamGamma{label}", -i0 / ep)
