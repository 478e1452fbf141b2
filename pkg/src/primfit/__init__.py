"""primfit: primitive recognition and relation inference for segmented
3D point clouds.

The pipeline fits planes, spheres, cylinders, cones and tori to each
segment by Hough voting in low-dimensional standard-form parameter spaces,
keeps the family with the lowest mean fitting error, and clusters the
fitted parameters to expose global relations (same primitive, equal radii,
parallel or coincident axes, coplanarity).
"""

from .cloudio import (
    CloudFormatError,
    FitRecord,
    Segment,
    SegmentedCloud,
    load_fit_results,
    load_segments,
    save_fit_results,
    save_segments,
)
from .geometry import (
    ConeParams,
    CylinderParams,
    DegenerateGeometryError,
    Family,
    PlaneParams,
    PrimitiveFit,
    SphereParams,
    TorusParams,
    RigidTransform,
    distance_to_primitive,
    evaluate_primitive,
)
from .estimators import EstimationError
from .hough import NoPeakError, ParamBox, RefineWindowError, vote
from .kernels import BACKEND as KERNEL_BACKEND
from .preprocess import PipelineConfig, mean_fitting_error, preprocess_segment
from .recognizer import (
    FamilyAttempt,
    RecognitionOutcome,
    fit_segment_with_family,
    recognize_cloud,
    recognize_segment,
)
from .relations import (
    QUERIES,
    ClassificationReport,
    RelationQuery,
    classification_metrics,
    cluster_params,
    complete_linkage,
    cut_dendrogram,
    descriptor_distance,
)
from .synthetic import NoiseSpec, SegmentSpec, generate_scene, sample_segment

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "KERNEL_BACKEND",
    # geometry
    "Family",
    "PlaneParams",
    "SphereParams",
    "CylinderParams",
    "ConeParams",
    "TorusParams",
    "RigidTransform",
    "PrimitiveFit",
    "DegenerateGeometryError",
    "evaluate_primitive",
    "distance_to_primitive",
    # pipeline
    "PipelineConfig",
    "preprocess_segment",
    "mean_fitting_error",
    "EstimationError",
    "NoPeakError",
    "RefineWindowError",
    "ParamBox",
    "vote",
    "fit_segment_with_family",
    "recognize_segment",
    "recognize_cloud",
    "FamilyAttempt",
    "RecognitionOutcome",
    # relations
    "RelationQuery",
    "QUERIES",
    "descriptor_distance",
    "complete_linkage",
    "cut_dendrogram",
    "cluster_params",
    "classification_metrics",
    "ClassificationReport",
    # synthetic data + io
    "NoiseSpec",
    "SegmentSpec",
    "generate_scene",
    "sample_segment",
    "Segment",
    "SegmentedCloud",
    "FitRecord",
    "CloudFormatError",
    "load_segments",
    "save_segments",
    "load_fit_results",
    "save_fit_results",
]
