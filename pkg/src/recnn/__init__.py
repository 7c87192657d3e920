"""Region convolutional features for multi-label image retrieval.

The pipeline takes dense per-pixel feature maps and segmentation label maps,
pools one descriptor per connected region, ranks an archive against queries
and scores the rankings.
"""
__version__ = "0.1.0"

from .dataio import FeatureMap, LabelMap, RasterImage
from .regionfeat import RegionFeatureSet, connected_components, global_max_pool, region_max_pool
from .retrieval import IndexConfig, RetrievalIndex, build_index, evaluate_scheme, query_ranked
from .similarity import region_set_distance, vector_distance
from .tensorops import bilinear_upsample, flatten_local_features, local_features, relu

__all__ = [
    "FeatureMap",
    "IndexConfig",
    "LabelMap",
    "RasterImage",
    "RegionFeatureSet",
    "RetrievalIndex",
    "bilinear_upsample",
    "build_index",
    "connected_components",
    "evaluate_scheme",
    "flatten_local_features",
    "global_max_pool",
    "local_features",
    "query_ranked",
    "region_max_pool",
    "region_set_distance",
    "relu",
    "vector_distance",
]
