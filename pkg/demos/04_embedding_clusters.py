# coding: utf-8

# # Comparing two embedding clouds
#
# Sentence embeddings are produced elsewhere and read from text files. Here we
# fake two corpora: a "real" one with loose topics and a "simulated" one whose
# posts are more repetitive. Tighter clusters show up as a higher silhouette
# and a smaller intra-cluster distance.

# In[1]:

import numpy as np

from echosim.embedding import EmbeddingSet, analyse


rng = np.random.default_rng(0)
topics = rng.normal(size=(6, 16))


def corpus(spread, n=300, source="real"):
    picks = rng.integers(0, len(topics), size=n)
    return EmbeddingSet(topics[picks] + rng.normal(scale=spread, size=(n, 16)), source)


real = corpus(1.2)
simulated = corpus(0.6, source="simulated")


# Vectors are L2-normalised before clustering, so only direction matters.
# k-means uses k-means++ seeding and a fixed seed.

# In[2]:

for emb in (real, simulated):
    r = analyse(emb, k=6, seed=0)
    print("%-9s silhouette %.3f  intra %.3f  inter %.3f  (%d iterations)"
          % (r["source"], r["silhouette"], r["intra"], r["inter"], r["iterations"]))


# The statistics depend on k, so always report it next to them.

# In[3]:

for k in (2, 4, 6, 8, 12):
    print("k=%2d  real %.3f  simulated %.3f"
          % (k, analyse(real, k)["silhouette"], analyse(simulated, k)["silhouette"]))
