"""Patch-wise CNN texture synthesis for inpainting large holes in textures."""

from .image import (GREY_WEIGHTS, ImageBuffer, RegionSpec,
                    fill_with_channel_means, image_to_tensor, read_mask_png,
                    read_png, tensor_to_image, to_greyscale_region, write_png)
from .lbfgs import OptimizationReport, OptimizerConfig, minimize
from .network import (DEFAULT_STATISTICS_LAYERS, STOCHASTIC_GLOBAL_LAYERS,
                      ConvLayer, FeatureNetwork, MaskPyramid, PoolLayer,
                      WeightFormatError, backward, exact_mask, forward,
                      load_weights, propagate_mask, random_network,
                      small_topology, vgg19_topology, write_weights)
from .pipeline import (DEFAULT_DELTA, DEFAULT_EXPAND, InpaintJob,
                       PatchSchedule, RunReport, build_schedule, coarse_pass,
                       embed_adjoint, embed_pooled, fine_pass, inpaint)
from .quilting import composite_patch, min_cut_seam, overlap_error
from .search import SearchGrid, build_search_grid, find_reference
from .statistics import (GramianSet, LossWeights, boundary_loss,
                         combined_loss, compute_statistics,
                         cross_correlation_loss, gramian, masked_gramian,
                         patch_distance, shifted_gramians, synthesis_loss,
                         total_loss)

__version__ = "0.1.0"
