"""filterscope: catalog trained 3x3 convolution filters and measure
distribution shifts between filter subsets in PCA-coefficient space."""

from .records import FilterRecord, FilterSet, LayerRecord, ModelMeta
from .fpack import parse_csv, parse_fpack, serialize_csv, serialize_fpack
from .catalog import FilterCatalog, Query
from .preprocess import MaxAbsFilterScaler, ScaledFilterSet, filter_scale, maxabs_scale
from .pca import (
    CoefficientSet,
    FilterPCA,
    MomentAccumulator,
    PcaBasis,
    fit_basis,
    reconstruct,
    transform_filters,
)
from .divergence import (
    ComponentHistogram,
    DivergenceConfig,
    build_histograms,
    shift,
    sym_kl,
)
from .analytics import (
    DecileScaleStats,
    Phenotype,
    PhenotypeThresholds,
    ShiftMatrix,
    classify_phenotype,
    depth_decile,
    mean_scale_per_decile,
    pairwise_shift_distribution,
    shift_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "FilterRecord",
    "FilterSet",
    "LayerRecord",
    "ModelMeta",
    "parse_csv",
    "parse_fpack",
    "serialize_csv",
    "serialize_fpack",
    "FilterCatalog",
    "Query",
    "MaxAbsFilterScaler",
    "ScaledFilterSet",
    "filter_scale",
    "maxabs_scale",
    "CoefficientSet",
    "FilterPCA",
    "MomentAccumulator",
    "PcaBasis",
    "fit_basis",
    "reconstruct",
    "transform_filters",
    "ComponentHistogram",
    "DivergenceConfig",
    "build_histograms",
    "shift",
    "sym_kl",
    "DecileScaleStats",
    "Phenotype",
    "PhenotypeThresholds",
    "ShiftMatrix",
    "classify_phenotype",
    "depth_decile",
    "mean_scale_per_decile",
    "pairwise_shift_distribution",
    "shift_matrix",
    "__version__",
]
