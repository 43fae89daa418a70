"""Symbolic derivation of the U(2) cohomogeneity-one curvature and of the
weighted Lichnerowicz operator on invariant symmetric 2-tensors.

Run with `python3 tools/derive_frame.py`. The printed expressions are the ones
hard-coded in crates/core/src/geometry.rs and crates/core/src/spectral.rs.
"""
import sympy as sp

s, th, ph, ps = sp.symbols('s theta phi psi', real=True)
X = [s, th, ph, ps]
b = sp.Function('b')(s)
c = sp.Function('c')(s)

# left-invariant coframe on S^3
sig1 = [0, -sp.sin(ps) / 2, sp.cos(ps) * sp.sin(th) / 2, 0]
sig2 = [0, sp.cos(ps) / 2, sp.sin(ps) * sp.sin(th) / 2, 0]
sig3 = [0, 0, sp.cos(th) / 2, sp.Rational(1, 2)]
ds = [1, 0, 0, 0]
theta = [ds, [b * x for x in sig1], [b * x for x in sig2], [c * x for x in sig3]]
Th = sp.Matrix(theta)          # Th[a, i]
E = sp.simplify(Th.inv())      # E[i, a]: frame vectors as columns

g = sp.simplify(Th.T * Th)
gi = sp.simplify(g.inv())
n = 4
Gam = [[[sp.simplify(sum(gi[k, l] * (sp.diff(g[l, i], X[j]) + sp.diff(g[l, j], X[i]) - sp.diff(g[i, j], X[l]))
                         for l in range(n)) / 2) for j in range(n)] for i in range(n)] for k in range(n)]


def riem(l, i, j, k):
    # R(d_j, d_k) d_i = R^l_{ijk} d_l
    r = sp.diff(Gam[l][i][k], X[j]) - sp.diff(Gam[l][i][j], X[k])
    r += sum(Gam[l][j][m] * Gam[m][i][k] - Gam[l][k][m] * Gam[m][i][j] for m in range(n))
    return r


Rdn = {}
for i in range(n):
    for j in range(n):
        for k in range(n):
            for l in range(n):
                Rdn[(i, j, k, l)] = sum(g[l, m] * riem(m, i, j, k) for m in range(n))
# Rm(X,Y,Z,W) = <R(X,Y)Z,W>; coordinates: Rdn[(i,j,k,l)] = <R(d_j,d_k)d_i, d_l>


def Rframe(a, bb, cc, d):
    # <R(e_a,e_b)e_c,e_d>
    tot = 0
    for j in range(n):
        for k in range(n):
            for i in range(n):
                for l in range(n):
                    coef = E[j, a] * E[k, bb] * E[i, cc] * E[l, d]
                    if coef != 0:
                        tot += coef * Rdn[(i, j, k, l)]
    return sp.simplify(tot.subs({th: sp.pi / 3, ps: sp.Rational(1, 3), ph: 0}))


pt = {th: sp.pi / 3, ps: sp.Rational(1, 3), ph: 0}
RF = {}
for a in range(n):
    for bb in range(n):
        for cc in range(n):
            for d in range(n):
                if a < bb and cc < d:
                    RF[(a, bb, cc, d)] = Rframe(a, bb, cc, d)
print("nonzero frame Rm(e_a,e_b,e_c,e_d), a<b, c<d:")
for key, v in RF.items():
    if v != 0:
        print(key, sp.simplify(v))


def Rf(a, bb, cc, d):
    sgn = 1
    if a > bb:
        a, bb, sgn = bb, a, -sgn
    if cc > d:
        cc, d, sgn = d, cc, -sgn
    if a == bb or cc == d:
        return 0
    return sgn * RF[(a, bb, cc, d)]


Ric = sp.Matrix(4, 4, lambda a, bb: sp.simplify(sum(Rf(a, k, k, bb) for k in range(n))))
print("Ric frame:", sp.simplify(Ric))
norm2 = sp.simplify(sum(Rf(a, bb, cc, d) ** 2 for a in range(n) for bb in range(n) for cc in range(n) for d in range(n)))
print("|Rm|^2 (full index sum):", norm2)

# ---- Lichnerowicz on invariant tensors ----
h00, h11, h33, h03 = [sp.Function(nm)(s) for nm in ('h00', 'h11', 'h33', 'h03')]
H = sp.Matrix([[h00, 0, 0, h03], [0, h11, 0, 0], [0, 0, h11, 0], [h03, 0, 0, h33]])
hc = sp.simplify(Th.T * H * Th)   # coordinate components


def cov1(T):
    # (nabla_k T)_{ij} -> D[k][i][j]
    return [[[sp.diff(T[i, j], X[k]) - sum(Gam[m][k][i] * T[m, j] + Gam[m][k][j] * T[i, m] for m in range(n))
              for j in range(n)] for i in range(n)] for k in range(n)]


D1 = cov1(hc)
D1 = [[[sp.simplify(D1[k][i][j]) for j in range(n)] for i in range(n)] for k in range(n)]


def lap():
    out = sp.zeros(4, 4)
    for i in range(n):
        for j in range(i, n):
            tot = 0
            for k in range(n):
                for l in range(n):
                    if gi[k, l] == 0:
                        continue
                    # (nabla_l nabla_k h)_{ij}
                    v = sp.diff(D1[k][i][j], X[l])
                    v -= sum(Gam[m][l][k] * D1[m][i][j] for m in range(n))
                    v -= sum(Gam[m][l][i] * D1[k][m][j] for m in range(n))
                    v -= sum(Gam[m][l][j] * D1[k][i][m] for m in range(n))
                    tot += gi[k, l] * v
            out[i, j] = tot
            out[j, i] = tot
    return out


L = lap()
Lf = sp.simplify((E.T * L * E).subs(pt))
RmH = sp.Matrix(4, 4, lambda a, bb: sp.simplify(sum(Rf(a, k, l, bb) * H[k, l] for k in range(n) for l in range(n))))
names = {(0, 0): 'L00', (1, 1): 'L11', (2, 2): 'L22', (3, 3): 'L33', (0, 3): 'L03', (0, 1): 'L01', (1, 2): 'L12', (1, 3): 'L13'}
for (a, bb), nm in names.items():
    print(nm, "Delta:", sp.simplify(sp.expand(Lf[a, bb])))
    print(nm, "2Rm:", sp.simplify(2 * RmH[a, bb]))
