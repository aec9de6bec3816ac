"""What the normalized edge attention block does.

Run from the repository root:  python3 demos/02_nea_block.py
"""
import numpy as np

from edgesr.network import NeaBlock
from edgesr.tensor import Tensor, no_grad

rng = np.random.default_rng(0)
block = NeaBlock(channels=8, edge_channels=4, rng=rng)

x = Tensor(rng.standard_normal((2, 8, 16, 16)))
edges = np.zeros((2, 1, 16, 16), dtype=np.float32)
edges[:, :, :, 8] = 1.0  # one vertical edge down the middle
e = Tensor(edges)

with no_grad():
    p = block.parts(x, e, train=True)

# the FiLM projection starts at zero, so the first pass is plain BN
print("gamma/beta max at init:", np.abs(p["gamma"].data).max(), np.abs(p["beta"].data).max())
print("x_norm == BN(x):", np.array_equal(p["x_norm"].data, p["bn"].data))

# the spatial gate is a sigmoid map in (0, 1), one value per pixel
a = p["attention"].data[0, 0]
print("attention on edge column %.4f, elsewhere %.4f" % (a[:, 8].mean(), np.delete(a, 8, axis=1).mean()))

# once the projection is trained, edges modulate every channel
block.film_proj.weight.data = rng.uniform(-0.5, 0.5, block.film_proj.weight.shape).astype(np.float32)
with no_grad():
    with_edges = block(x, e, train=False).data
    without = block(x, Tensor(np.zeros_like(edges)), train=False).data
print("max |out(edges) - out(no edges)|: %.4f" % np.abs(with_edges - without).max())
print("output shape", with_edges.shape)
