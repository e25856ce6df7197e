"""Diverse hyperspectral band selection with k-DPP sampling and SAM-based grouping."""

from .correlation import (
    CoefficientMatrix,
    CorrelationMatrix,
    DppKernel,
    SpectralBasis,
    correlation_matrix,
    factorize,
    heatmap,
    reconstruct,
    to_kernel,
)
from .hsi_core import (
    BandVector,
    CubeFormatError,
    DownsampleOperator,
    HsiCube,
    SyntheticSpec,
    band_vector,
    downsample,
    gen_synthetic,
    load_cube,
    save_cube,
)
from .kdpp import (
    BandSubset,
    EigenDecomposition,
    KdppSampler,
    SubsetPmf,
    SymmetricPolyTable,
    eigendecompose,
    elementary_symmetric,
    exact_kdpp_pmf,
    sample_eigenvector_set,
    sample_items,
    sample_kdpp,
)
from .pipeline import GroupingReport, PipelineConfig, run_group_pipeline
from .sam import GroupAssignment, SamMatrix, assign_groups, detect_overlaps, sam, sam_matrix

__version__ = "0.1.0"
