"""The two population identities behind the estimators, on a finite joint.

With a finite joint over (x, z, y) and selection probabilities depending on
(x, z) only, everything is computable by enumeration, so the algebra that
justifies the estimators can be checked to machine precision:

* importance weighting: E[w(X,Z) f(X,Y) | S=1] = E[f(X,Y)] for the exact
  weights w = P(S=1) / P(S=1|x,z);
* repeated regression: averaging the selected-rows conditional mean
  E[Y | x, z, S=1] over P(z | x) recovers E[Y | x], even when the naive
  selected-only mean E[Y | x, S=1] is far off.

Run:  python demos/population_identities.py
"""

import numpy as np

rng = np.random.default_rng(0)

# a small joint: P(x, z, y) on 3 x 3 x 2 support, selection leaning on z
px = rng.dirichlet(np.full(3, 4.0))
pz_given_x = rng.dirichlet(np.full(3, 4.0), size=3)
py1 = np.clip(np.array([0.15, 0.5, 0.85])[None, :] + rng.uniform(-0.05, 0.05, (3, 3)), 0.02, 0.98)
sel = np.clip(np.array([0.9, 0.5, 0.1])[None, :] + rng.uniform(-0.05, 0.05, (3, 3)), 0.02, 0.98)

pxzy = np.zeros((3, 3, 2))
pxzy[:, :, 1] = px[:, None] * pz_given_x * py1
pxzy[:, :, 0] = px[:, None] * pz_given_x * (1 - py1)

p_s1 = float(np.sum(pxzy.sum(axis=2) * sel))
weights = p_s1 / sel
print(f"marginal selection probability P(S=1) = {p_s1:.4f}")
print(f"weight range on the support: [{weights.min():.3f}, {weights.max():.3f}]\n")

# identity 1: weighted selected expectation == population expectation
f = rng.uniform(-2, 2, size=(3, 2))  # arbitrary bounded f(x, y)
pop = np.einsum("ijk,ik->", pxzy, f)
p_sel = pxzy * sel[:, :, None] / p_s1
weighted = np.einsum("ijk,ij,ik->", p_sel, weights, f)
print(f"E[f]              = {pop:+.12f}")
print(f"E[w f | S=1]      = {weighted:+.12f}")
print(f"difference        = {abs(pop - weighted):.2e}\n")

# identity 2: the two-stage table recovers E[Y|X]; the naive table does not
e_y_x = np.einsum("ijk,k->i", pxzy, [0.0, 1.0]) / pxzy.sum(axis=(1, 2))
psel = pxzy * sel[:, :, None]
inner = np.einsum("ijk,k->ij", psel, [0.0, 1.0]) / psel.sum(axis=2)
rr = np.sum(inner * (pxzy.sum(axis=2) / pxzy.sum(axis=(1, 2))[:, None]), axis=1)
naive = np.einsum("ijk,k->i", psel, [0.0, 1.0]) / psel.sum(axis=(1, 2))
print("x cell   E[Y|x]    two-stage   naive-selected")
for i in range(3):
    print(f"  {i}     {e_y_x[i]:.6f}   {rr[i]:.6f}    {naive[i]:.6f}")
print(f"\ntwo-stage max deviation: {np.max(np.abs(rr - e_y_x)):.2e}")
print(f"naive     max deviation: {np.max(np.abs(naive - e_y_x)):.3f}")
