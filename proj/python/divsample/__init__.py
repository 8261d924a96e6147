"""Python access to the divsample core."""

from ._divsample import (
    CommandError,
    ShapeError,
    accuracy_loss,
    ade,
    apd,
    coefficients,
    dct_truncate,
    default_synthetic_config,
    desk_hyperparams,
    energy_diversity,
    fde,
    generate_dataset,
    gumbel_transform,
    hinge_diversity,
    idct_expand,
    kl_regularizer,
    median_metrics,
    mmade,
    mmfde,
    pca_project,
    run_cli,
    validate_hyperparams,
)

__all__ = [name for name in dir() if not name.startswith("_")]
