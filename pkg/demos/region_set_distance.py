"""
Matching two sets of region descriptors
=======================================

Each query region looks for its nearest archive region; the distance is the
mean of those nearest-neighbour distances, so it is not symmetric.
"""
import numpy as np

from recnn.similarity import pairwise_l2, region_set_distance

query = np.array([[0.0, 0.0], [1.0, 1.0]])
archive = np.array([[0.0, 1.0], [2.0, 2.0]])

print(pairwise_l2(query, archive))
print("query -> archive:", region_set_distance(query, archive))
print("archive -> query:", region_set_distance(archive, query))
print("symmetric:       ", region_set_distance(query, archive, symmetric=True))

# an extra archive region can only help the query
padded = np.vstack([archive, [[1.0, 1.0]]])
print("with a matching region added:", region_set_distance(query, padded))
