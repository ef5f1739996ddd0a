"""
Construction identities of the transport-embedded network
==========================================================

The flux built from a network potential is divergence-free before any
training, and adding the gradient correction turns it into a conserved
transport flux.  This script checks both on random networks, then breaks the
Levi-Civita table on purpose to show the checks notice.
"""

# %%
import numpy as np

from tenn.embedding import assemble_M, curl_spacetime, recover_velocity, spacetime_div
from tenn.network import mlp_forward
from tenn.train import sample_collocation
from tenn.verify import corrupted_levi_civita, random_network, run_verify

# %%
# One random potential network and a batch of spacetime points.
spec, params = random_network(0, "softplus")
points = sample_collocation(500, 0)
heads = mlp_forward(params, spec, points, 3)

# %%
# The spacetime curl of the potential has zero spacetime divergence.
T = curl_spacetime(heads)
print("max |Div T|            ", np.abs(spacetime_div(T).value).max())

# %%
# With diffusion gamma, Div M equals gamma times the Laplacian of T_0.
gamma = 0.01
flux = assemble_M(T, gamma)
lap = (T[0].diff(1).diff(1) + T[0].diff(2).diff(2)).value
print("max |Div M - g lap T0| ", np.abs(spacetime_div(flux.M).value - gamma * lap).max())

# %%
# Velocity recovered by exact division reproduces the flux where omega is not small.
u = recover_velocity(flux.M, flux.omega, 0.0)
keep = np.abs(flux.omega.value) > 1e-3
gap = [np.abs(flux.M[i + 1].value - flux.omega.value * u[i].value)[keep].max() for i in (0, 1)]
print("max |M_i - omega u_i|  ", max(gap))

# %%
# The full verify sweep, then the same sweep with one Levi-Civita sign flipped.
for label, eps in (("clean", None), ("corrupted", corrupted_levi_civita())):
    kwargs = {} if eps is None else {"eps": eps}
    print(f"\n{label} table")
    for result in run_verify(networks=4, points=200, **kwargs):
        print(" ", result.line())
