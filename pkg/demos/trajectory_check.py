"""Free vibration of a two-dof model against its single-master normal form.

Prints the relative RMS displacement error over 50 periods for a few
amplitudes expressed through ``|gamma| a^2``.
"""
from __future__ import annotations

import numpy as np

from nlrom import gamma_closed_form, integrate, make_two_dof, nf_third_order, reconstruct


def main():
    mm = make_two_dof(1.0, 5.0, g={(1, 0, 0): 0.5, (0, 0, 0): 0.1, (0, 1, 1): 0.2},
                      h={(0, 0, 0, 0): 1.0, (0, 0, 1, 1): 0.3})
    mp, rm = nf_third_order(mm, 0)
    gam = abs(gamma_closed_form(mm, 0, "nf"))
    T = 2 * np.pi / mm.omega[0]
    print("gamma_a2,rms_percent")
    for level in (0.005, 0.01, 0.02, 0.05, 0.1):
        a = np.sqrt(level / gam)
        X0, V0 = mp.evaluate([[a, 0.0]])
        full = integrate(mm, X0[0], V0[0], 50 * T, T / 300)
        red = integrate(rm, [a], [0.0], 50 * T, T / 300)
        X, _ = reconstruct(mp, np.column_stack([red.x, red.v]))
        err = np.sqrt(np.mean(np.sum((X - full.x) ** 2, 1)) / np.mean(np.sum(full.x ** 2, 1)))
        print(f"{level:g},{100 * err:.3f}")


if __name__ == "__main__":
    main()
