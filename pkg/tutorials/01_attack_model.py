"""Attack counts and beliefs about attack rates.

Each node is attacked a Poisson number of times per step, but at most m
attacks can be observed.  The defender keeps a Gamma belief on every rate.
"""
# %%
import numpy as np

from mnbgrid.attacks import (GammaBelief, TruncatedPoissonModel, draw_counts, mean_attacks,
                             pmf_vector, update_belief)

rng = np.random.default_rng(0)

# %% The truncated count puts all mass beyond m on m itself.
model = TruncatedPoissonModel(lam=1.2, m=3)
print("pmf over 0..3:", np.round(pmf_vector(model), 4))
print("mean attacks :", round(mean_attacks(model), 4))

# %% Learning a rate from observed counts.
belief = GammaBelief(2.0, 2.0)
for k in draw_counts(np.full(1000, 0.5), 3, rng):
    belief = update_belief(belief, int(k), m=3)
print(f"posterior after 1000 steps: Gamma({belief.alpha:.0f}, {belief.beta:.0f}),"
      f" mean {belief.mean:.3f} (true 0.5)")
