# coding: utf-8

# # Network metrics on toy graphs
#
# The four structural metrics all work on the undirected projection of the
# follow graph: a reciprocal pair of follows counts as one edge. Small graphs
# make it easy to check the numbers by hand.

# In[1]:

import random

from echosim import SocialGraph, UserState
from echosim.metrics import (average_path_length, clustering_coefficient, compute_metrics,
                             density, detect_communities, modularity_of, stance_accuracy)


def graph(n, edges, opinions=None):
    opinions = opinions or [0.0] * n
    return SocialGraph([UserState(i, o) for i, o in enumerate(opinions)], edges)


# Two triangles with nothing between them. Splitting them apart gives
# modularity 0.5, and the detector finds that split.

# In[2]:

tri = graph(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
print("Q(planted) =", modularity_of(tri, [0, 0, 0, 1, 1, 1]))
print("detected   =", detect_communities(tri, random.Random(0)))


# A 4-cycle with one chord. The two chord ends sit in two triangles out of
# three possible, the other two corners close their only pair: (2/3 + 2/3 + 1 + 1) / 4.

# In[3]:

chorded = graph(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
print("clustering = %.4f" % clustering_coefficient(chorded))


# Path length is averaged over the largest connected component only. Here a
# 4-node path wins over a 2-node fragment.

# In[4]:

split = graph(6, [(0, 1), (1, 2), (2, 3), (4, 5)])
print("average path length = %.4f" % average_path_length(split))
print("density = %.4f (directed: 4 of 30 possible)" % density(split))


# Stance accuracy buckets opinions at +/- 1/3 and compares with ground-truth labels.

# In[5]:

g = graph(4, [(0, 1)], opinions=[0.9, -0.7, 0.1, 0.5])
truth = {0: "favor", 1: "oppose", 2: "neutral", 3: "neutral"}
print("stance accuracy =", stance_accuracy(g, truth))


# `compute_metrics` bundles everything into one checkpoint row. Undefined
# values (for example path length on an edgeless graph) come back as None.

# In[6]:

print(compute_metrics(tri, step=0).to_dict())
print(compute_metrics(graph(3, []), step=0).to_dict())
