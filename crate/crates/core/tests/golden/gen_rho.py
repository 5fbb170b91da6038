# Regenerates rho.txt with sympy, independently of the Rust implementation.
import sympy as sp

N = 16
u = sp.symbols("u1:%d" % N)  # u[k-1] = k-th z-derivative of u
I = sp.I


def d(e):
    e = sp.expand(e)
    return sp.expand(sum(sp.diff(e, u[k]) * u[k + 1] for k in range(N - 2)))


s1 = sp.Matrix([[0, 1], [1, 0]])
s2 = sp.Matrix([[0, -I], [I, 0]])
s3 = sp.Matrix([[1, 0], [0, -1]])
R = {1: -sp.Rational(1, 2) * u[0] * s2, 2: sp.Rational(1, 2) * u[1] * s1}
K = {1: -I * s3, 2: -u[0] * s1}
JMAX = 12
for k in range(2, JMAX):
    rhs = -u[0] * sum((R[n] * s1 * R[k - n] for n in range(1, k)), sp.zeros(2)) - 2 * R[k].applyfunc(d)
    rhs = rhs.applyfunc(sp.expand)
    assert rhs[0, 0] == 0 and rhs[1, 1] == 0
    R[k + 1] = sp.Matrix([[0, rhs[0, 1] / (-2 * I)], [rhs[1, 0] / (2 * I), 0]]).applyfunc(sp.expand)
for j in range(2, JMAX):
    K[j + 1] = (-I * (R[j] * s3 - s3 * R[j]) - sum((K[i] * R[j + 1 - i] for i in range(2, j + 1)), sp.zeros(2))).applyfunc(sp.expand)


def canonical(expr):
    poly = sp.Poly(expr, *u)
    terms = []
    for exps, c in poly.terms():
        factors = []
        for k, e in enumerate(exps):
            factors += [k + 1] * e
        terms.append((tuple(factors), sp.Rational(c)))
    terms.sort(key=lambda t: (len(t[0]), t[0]), reverse=True)
    out = ""
    for n, (f, c) in enumerate(terms):
        neg = c < 0
        mag = -c if neg else c
        if n == 0:
            out += "-" if neg else ""
        else:
            out += " - " if neg else " + "
        parts = []
        for k in sorted(set(f)):
            m = f.count(k)
            parts.append("(Dz^%d u)" % k + ("^%d" % m if m > 1 else ""))
        body = "*".join(parts)
        coeff = str(mag.p) if mag.q == 1 else "%d/%d" % (mag.p, mag.q)
        out += body if mag == 1 else coeff + "*" + body
    return out


with open("rho.txt", "w") as fh:
    for j in range(2, JMAX + 1, 2):
        Kj = K[j]
        assert Kj[0, 0] == 0 and Kj[1, 1] == 0 and sp.expand(Kj[0, 1] - Kj[1, 0]) == 0
        fh.write("rho%d = %s\n" % (j, canonical(Kj[0, 1])))
