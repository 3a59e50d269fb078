"""The three matrix views of the code tensor.

Codes live in a (p, n, m) tensor indexed [patch, sample, atom].  Each
objective term wants a different 2-D arrangement of the same numbers:

  bar   (m, n*p)  pairs with the patch matrix in the fidelity term
  hat   (p, m*n)  the layout elementwise l1 shrinkage runs on
  tilde (m*p, n)  per-sample feature columns for the classifier

All three are pure index remappings; converting back and forth never
changes a single bit.
"""

import numpy as np

from convadl import from_bar, from_hat, from_tilde, view_bar, view_hat, \
    view_tilde

p, n, m = 2, 2, 2
u = np.zeros((p, n, m))
for k in range(p):
    for j in range(n):
        for i in range(m):
            # digits encode (atom, sample, patch), all 1-based
            u[k, j, i] = 100 * (i + 1) + 10 * (j + 1) + (k + 1)

print("bar view (rows = atoms, columns sample-major patch-minor):")
print(view_bar(u).astype(int))
print("\nhat view (rows = patches, columns atom-fastest per sample):")
print(view_hat(u).astype(int))
print("\ntilde view (per-sample columns, atoms stacked in blocks of p):")
print(view_tilde(u).astype(int))

rng = np.random.default_rng(1)
big = rng.standard_normal((5, 4, 3))
roundtrips = [
    np.array_equal(from_bar(view_bar(big), 5, 4, 3), big),
    np.array_equal(from_hat(view_hat(big), 5, 4, 3), big),
    np.array_equal(from_tilde(view_tilde(big), 5, 4, 3), big),
]
print("\nbit-exact roundtrips:", roundtrips)

# The training loop hops bar -> tilde -> hat and back every iteration;
# chaining the conversions is still the identity.
ubar = view_bar(big)
chained = view_bar(
    from_tilde(view_tilde(from_hat(view_hat(from_tilde(
        view_tilde(from_bar(ubar, 5, 4, 3)), 5, 4, 3)), 5, 4, 3)), 5, 4, 3))
print("chained conversions drift:", float(np.max(np.abs(chained - ubar))))
