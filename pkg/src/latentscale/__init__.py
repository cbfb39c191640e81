"""latentscale: multiscale mixing-measure estimation and density-based clustering.

Fits discrete mixing measures of Gaussian convolution mixtures across a
bandwidth grid, selects a representative bandwidth by an information
criterion, and turns the selected measure's support geometry into
dendrograms, component densities, and a hard classifier.
"""

from .components import (
    ComponentModel,
    bayes_classify,
    class_conditional_log_density,
    classify_dataset,
    component_model_from_dict,
    decompose,
)
from .data import (
    CsvFormatError,
    GENERATOR_NAMES,
    GeneratorSpec,
    generate,
    load_csv,
    save_csv,
    true_component_count,
)
from .measure import (
    BoundingBox,
    Dataset,
    DiscreteMeasure,
    MixtureModel,
    data_bounding_box,
    load_mixture_json,
    log_likelihood,
    mixture_from_dict,
    mixture_log_density,
    mixture_to_dict,
    save_mixture_json,
)
from .metrics import (
    GAUSS_SMOOTHING_COEF_1D,
    ari,
    smoothing_l1_distance_1d,
    w1_1d,
    w1_exact_small,
)
from .npmle import (
    FitResult,
    SolverConfig,
    atom_count_bound,
    fit_npmle,
    fit_npmle_grid,
    fit_result_from_dict,
    gradient_function,
    grid_dual_gap,
)
from .selection import (
    PipelineResult,
    SweepRecord,
    bic_score,
    default_sigma_grid,
    load_pipeline_json,
    pipeline_result_from_dict,
    run_pipeline,
    save_pipeline_json,
    select_sigma,
    sweep,
    sweep_table_rows,
)
from .structure import (
    ComponentSets,
    Dendrogram,
    LevelSetEmptyError,
    box_smooth_density,
    cut_count_at_height,
    cut_dendrogram,
    dendrogram_from_dict,
    eps_component_count,
    extract_components,
    single_linkage,
    suggest_k,
    voronoi_label,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "ComponentModel",
    "ComponentSets",
    "CsvFormatError",
    "Dataset",
    "Dendrogram",
    "DiscreteMeasure",
    "FitResult",
    "GAUSS_SMOOTHING_COEF_1D",
    "GENERATOR_NAMES",
    "GeneratorSpec",
    "LevelSetEmptyError",
    "MixtureModel",
    "PipelineResult",
    "SolverConfig",
    "SweepRecord",
    "ari",
    "atom_count_bound",
    "bayes_classify",
    "bic_score",
    "box_smooth_density",
    "class_conditional_log_density",
    "classify_dataset",
    "component_model_from_dict",
    "cut_count_at_height",
    "cut_dendrogram",
    "data_bounding_box",
    "decompose",
    "default_sigma_grid",
    "dendrogram_from_dict",
    "eps_component_count",
    "extract_components",
    "fit_npmle",
    "fit_npmle_grid",
    "fit_result_from_dict",
    "generate",
    "gradient_function",
    "grid_dual_gap",
    "load_csv",
    "load_mixture_json",
    "load_pipeline_json",
    "log_likelihood",
    "mixture_from_dict",
    "mixture_log_density",
    "mixture_to_dict",
    "pipeline_result_from_dict",
    "run_pipeline",
    "save_csv",
    "save_mixture_json",
    "save_pipeline_json",
    "select_sigma",
    "single_linkage",
    "smoothing_l1_distance_1d",
    "suggest_k",
    "sweep",
    "sweep_table_rows",
    "true_component_count",
    "voronoi_label",
    "w1_1d",
    "w1_exact_small",
]
