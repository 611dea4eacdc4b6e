"""Virtual IMU fusion and propagation for rigid multi-IMU arrays."""

from ._vimu import (
    Config,
    FusionModel,
    ImuArrayConfig,
    ImuNoiseParams,
    ImuSpec,
    NeesRow,
    RmsRow,
    TrajectoryPoint,
    UnitQuaternion,
    VimuError,
    VimuPropagator,
    VimuState,
    VirtualSample,
    build_fusion,
    build_fusion_weighted,
    chi_square_mean_interval,
    default_config,
    fuse,
    left_nullspace,
    load_config,
    omega_matrix,
    parse_config,
    pinv,
    run_experiment,
    run_nees,
    skew,
    so3_exp,
    so3_log,
)

__all__ = [name for name in dir() if not name.startswith("_")]
