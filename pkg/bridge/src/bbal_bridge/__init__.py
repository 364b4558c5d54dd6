"""Bridge from scikit-learn ensembles to the bbal selection CLI."""

from .export import (
    UnsupportedModelError,
    export_member_predictions,
    member_predictions,
    write_prediction_csv,
)
from .loop import (
    BridgeConfig,
    BridgeError,
    BridgeResult,
    bridge_al_loop,
    load_dataset,
    run_select,
)

__all__ = [
    "BridgeConfig",
    "BridgeError",
    "BridgeResult",
    "UnsupportedModelError",
    "bridge_al_loop",
    "export_member_predictions",
    "load_dataset",
    "member_predictions",
    "run_select",
    "write_prediction_csv",
]

__version__ = "0.1.0"
