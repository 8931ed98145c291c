from ._spdstats import (
    DegenerateGroupError,
    DomainError,
    Error,
    NumericalError,
    ShapeError,
    SingularScatterError,
    StateError,
    UnsupportedMetric,
    calinski_harabasz_score,
    combat_harmonization,
    davies_bouldin_score,
    distance,
    exp,
    frechet_anova,
    frechet_mean,
    get_num_threads,
    log,
    manifold_dim,
    metrics,
    parallel_transport,
    rigid_harmonization,
    riem_anova,
    rspdnorm,
    set_num_threads,
    silhouette_score,
    unvec,
    vec,
)

__version__ = "0.1.0"
