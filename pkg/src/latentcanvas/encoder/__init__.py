from .pooling import (POOL_VARIANTS, FeatureMap, LatentTargets, PoolGrid, bin_bounds, choose_pool_grid, mlerp_merge,
                      pool_avg_1d, pool_avg_2d, pool_mlerp_2d, pool_targets)
from .vision import EncoderConfig, ToyVisionEncoder, VisionEncoder, area_resize, target_size
from .cache import TargetCache, TargetCacheError, cache_key
