"""Symbolic |h|^2, |∇h|^2 and |∇^2 h|^2 for U(2)-invariant symmetric
2-tensors h = h00 e0e0 + h11 (e1e1 + e2e2) + h33 e3e3 + h03 (e0e3 + e3e0) on
g = ds^2 + b^2 (σ1^2 + σ2^2) + c^2 σ3^2.

Run with `python3 tools/derive_box_norms.py`. The printed expressions are the
ones hard-coded in crates/core/src/monitors.rs.
"""
import sympy as sp

s, th, ph, ps = sp.symbols('s theta phi psi', real=True)
X = [s, th, ph, ps]
b = sp.Function('b')(s)
c = sp.Function('c')(s)
H = {k: sp.Function(k)(s) for k in ('h00', 'h11', 'h33', 'h03')}

sig1 = [0, -sp.sin(ps) / 2, sp.cos(ps) * sp.sin(th) / 2, 0]
sig2 = [0, sp.cos(ps) / 2, sp.sin(ps) * sp.sin(th) / 2, 0]
sig3 = [0, 0, sp.cos(th) / 2, sp.Rational(1, 2)]
ds = [1, 0, 0, 0]
theta = sp.Matrix([ds, [b * x for x in sig1], [b * x for x in sig2], [c * x for x in sig3]])
g = sp.simplify(theta.T * theta)
gi = sp.simplify(g.inv())
n = 4
Gam = [[[sp.simplify(sum(gi[k, l] * (sp.diff(g[l, i], X[j]) + sp.diff(g[l, j], X[i]) - sp.diff(g[i, j], X[l]))
                         for l in range(n)) / 2) for j in range(n)] for i in range(n)] for k in range(n)]

hf = sp.zeros(4, 4)
hf[0, 0] = H['h00']
hf[1, 1] = H['h11']
hf[2, 2] = H['h11']
hf[3, 3] = H['h33']
hf[0, 3] = hf[3, 0] = H['h03']
h = theta.T * hf * theta  # coordinate components


def cov1(T):
    # (∇T)_{k i j} = ∂_k T_ij - Γ^m_{k i} T_mj - Γ^m_{k j} T_im
    return [[[sp.diff(T[i, j], X[k]) - sum(Gam[m][k][i] * T[m, j] + Gam[m][k][j] * T[i, m] for m in range(n))
              for j in range(n)] for i in range(n)] for k in range(n)]


def cov2(D):
    # (∇∇T)_{l k i j}
    out = {}
    for l in range(n):
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    v = sp.diff(D[k][i][j], X[l])
                    v -= sum(Gam[m][l][k] * D[m][i][j] + Gam[m][l][i] * D[k][m][j] + Gam[m][l][j] * D[k][i][m]
                             for m in range(n))
                    out[(l, k, i, j)] = v
    return out


pt = {th: sp.pi / 3, ps: sp.Rational(1, 3), ph: 0}
gip = gi.subs(pt)


def norm2(idx_val, rank):
    import itertools
    tot = 0
    keys = list(itertools.product(range(n), repeat=rank))
    vals = {k: sp.simplify(idx_val(k).subs(pt)) for k in keys}
    for a in keys:
        if vals[a] == 0:
            continue
        for bb in keys:
            if vals[bb] == 0:
                continue
            w = 1
            for x, y in zip(a, bb):
                w *= gip[x, y]
                if w == 0:
                    break
            if w != 0:
                tot += w * vals[a] * vals[bb]
    return sp.simplify(sp.expand(tot))


n0 = norm2(lambda k: h[k[0], k[1]], 2)
print("|h|^2 =", n0)
D = cov1(h)
n1 = norm2(lambda k: D[k[0]][k[1]][k[2]], 3)
print("|Dh|^2 =", sp.collect(sp.expand(n1), list(H.values())))
DD = cov2(D)
n2 = norm2(lambda k: DD[k], 4)
print("|DDh|^2 =", sp.expand(n2))

# Rust expressions in terms of plain symbols.
names = {}
for f, base in ((b, 'b'), (c, 'c')):
    names[sp.Derivative(f, (s, 2))] = sp.Symbol(base + 'ss')
    names[sp.Derivative(f, s)] = sp.Symbol(base + 's')
for k, f in H.items():
    names[sp.Derivative(f, (s, 2))] = sp.Symbol(k + '_ss')
    names[sp.Derivative(f, s)] = sp.Symbol(k + '_s')
names.update({b: sp.Symbol('b'), c: sp.Symbol('c')})
names.update({f: sp.Symbol(k) for k, f in H.items()})


def plain(e):
    e = e.subs({k: v for k, v in names.items() if isinstance(k, sp.Derivative) and k.derivative_count == 2})
    e = e.subs({k: v for k, v in names.items() if isinstance(k, sp.Derivative)})
    return e.subs(names)


for label, e in (("norm1_sq", n1), ("norm2_sq", n2)):
    print(label, "=", sp.rust_code(sp.simplify(plain(e))))
