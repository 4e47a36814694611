"""Refine symlet scaling filters to full double precision.

Starting from the published (PyWavelets) tables, Newton-iterate the
orthonormality and vanishing-moment equations in 60-digit arithmetic and
print C++ initializer rows. Used once to produce src/filter_tables.cpp.
"""
import mpmath as mp
import pywt

mp.mp.dps = 60


def residual(h, p):
    F = 2 * p
    eqs = []
    for m in range(p):
        s = mp.fsum(h[k] * h[k + 2 * m] for k in range(F - 2 * m))
        eqs.append(s - (1 if m == 0 else 0))
    for j in range(p):
        eqs.append(mp.fsum((-1) ** k * mp.mpf(k) ** j * h[k] for k in range(F)))
    return eqs


def refine(name):
    p = int(name[3:])
    h = [mp.mpf(x) for x in pywt.Wavelet(name).rec_lo]
    for _ in range(30):
        r = residual(h, p)
        J = mp.matrix(len(r), len(h))
        eps = mp.mpf(10) ** -40
        for i in range(len(h)):
            hp = list(h)
            hp[i] += eps
            rp = residual(hp, p)
            for e in range(len(r)):
                J[e, i] = (rp[e] - r[e]) / eps
        dx = mp.lu_solve(J, mp.matrix(r))
        h = [h[i] - dx[i] for i in range(len(h))]
        if mp.norm(mp.matrix(r)) < mp.mpf(10) ** -45:
            break
    drift = max(abs(float(h[i]) - pywt.Wavelet(name).rec_lo[i]) for i in range(len(h)))
    return h, drift


if __name__ == "__main__":
    for p in range(2, 9):
        name = "sym%d" % p
        h, drift = refine(name)
        print('    {"%s", {%s}},  // max drift from seed %.1e'
              % (name, ", ".join(mp.nstr(x, 17) for x in h), drift))
