"""
Region features from a segmentation map
=======================================

A coarse feature map is upsampled to the label grid, split into connected
regions of equal class, and max-pooled per region.
"""
import numpy as np

from recnn import FeatureMap, LabelMap
from recnn.regionfeat import connected_components, extract_region_features, global_max_pool
from recnn.tensorops import local_features

# a 2x2 feature map with 3 channels, one of them negative everywhere
fmap = FeatureMap(np.array([
    [[1.0, 0.0, -1.0], [0.0, 2.0, -1.0]],
    [[0.5, 0.5, -1.0], [3.0, 0.0, -1.0]],
]))

# class 0 on the top left plus a strip that touches it only at a corner,
# so the two connectivities disagree
labels = LabelMap(np.array([
    [0, 0, 1, 1],
    [0, 0, 1, 1],
    [1, 1, 0, 1],
    [1, 1, 0, 1],
], dtype=np.uint8))

local = local_features(fmap, labels.height, labels.width)
print("local feature matrix:", local.descriptors.shape)

for connectivity in (4, 8):
    rmap, regions = connected_components(labels, connectivity)
    print(f"\n{connectivity}-connectivity, {len(regions)} regions")
    print(rmap)

regions = extract_region_features(local, labels, connectivity=4)
for region, desc in zip(regions.regions, regions.descriptors):
    print(f"region {region.id} class {region.class_id} ({region.pixel_count} px):", np.round(desc, 3))

# pooling the region descriptors again gives the global vector
print("\nmax over regions:", regions.descriptors.max(axis=0))
print("global max pool: ", global_max_pool(local))
