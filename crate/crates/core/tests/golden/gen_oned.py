# Regenerates oned_e6.txt: the periodic orbit of u'' = -4 sinh u with energy
# E = u'^2/2 + 4 cosh u = 6, started at its maximum, sampled at 128 points.
# Period by tanh-sinh quadrature and samples by a Taylor ODE integrator (mpmath).
import mpmath as mp

mp.mp.dps = 30
E = mp.mpf(6)
N = 128
a = mp.acosh(E / 4)
period = 2 * mp.quad(lambda u: 1 / mp.sqrt(2 * E - 8 * mp.cosh(u)), [-a, 0, a])
sol = mp.odefun(lambda t, y: [y[1], -4 * mp.sinh(y[0])], 0, [a, mp.mpf(0)])
with open("oned_e6.txt", "w") as out:
    out.write("# energy 6, samples %d\n" % N)
    out.write("period %s\n" % mp.nstr(period, 20))
    for i in range(N):
        out.write("%s\n" % mp.nstr(sol(period * i / N)[0], 20))
