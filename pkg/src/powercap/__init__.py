"""Power-aware container scheduling under a server power cap."""

from .core import FeatureVector, JoinedRecord, PowerModel
from .powermodel import fit, mape, predict_container_power, predict_server_power

__all__ = ["FeatureVector", "JoinedRecord", "PowerModel", "fit", "mape", "predict_container_power", "predict_server_power"]
