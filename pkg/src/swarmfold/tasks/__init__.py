"""End-to-end problems: attitude estimation, robot arms, multilayer network alignment."""
from .arm import (ArmFit, ArmObservation, arm_fit_planar, arm_fit_spatial, planar_marginals,
                  planar_policy_samples, read_observation_csv, spatial_marginals,
                  write_observation_csv)
from .multilayer import (LayerCloud, MultilayerResult, loss_term_count, multilayer_align,
                         planted_instance, read_layer_cloud, write_layer_cloud)
from .wahba import (WahbaInstance, WahbaResult, random_instance, read_instance_csv, wahba_loss,
                    wahba_stochastic, wahba_svd, write_instance_csv)

__all__ = [
    "ArmFit", "ArmObservation", "LayerCloud", "MultilayerResult", "WahbaInstance", "WahbaResult",
    "arm_fit_planar", "arm_fit_spatial", "loss_term_count", "multilayer_align", "planar_marginals",
    "planar_policy_samples", "planted_instance", "random_instance", "read_instance_csv",
    "read_layer_cloud", "read_observation_csv", "spatial_marginals", "wahba_loss",
    "wahba_stochastic", "wahba_svd", "write_instance_csv", "write_layer_cloud",
    "write_observation_csv",
]
