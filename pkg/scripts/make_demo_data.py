"""Regenerate the demo inputs under data/ (deterministic)."""
import os

import numpy as np

from swarmfold import dirstat
from swarmfold.io import write_samples_csv
from swarmfold.tasks import arm, multilayer, wahba

HERE = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir, "data")


def main():
    os.makedirs(HERE, exist_ok=True)
    inst, _ = wahba.random_instance(m=20, sigma=0.05, seed=2024)
    wahba.write_instance_csv(os.path.join(HERE, "wahba_demo.csv"), inst)

    times = np.arange(30) * 0.1
    teacher = np.array([0.5, 1.0, -0.6, 0.8, 0.3, 0.2, -0.4])
    start = arm.ArmObservation(times, np.tile([0.1, 1.0, 2.0], (times.size, 1)))
    obs = arm.ArmObservation(times, arm.planar_rollout(teacher, start))
    arm.write_observation_csv(os.path.join(HERE, "arm_planar_demo.csv"), obs)

    cloud, _ = multilayer.planted_instance(p=10, d=2, seed=5)
    multilayer.write_layer_cloud(os.path.join(HERE, "layers_demo.json"), cloud)

    pts = dirstat.sample(dirstat.VonMisesParams(1.0, 4.0), 2000, rng=11)
    write_samples_csv(os.path.join(HERE, "von_mises_demo.csv"), pts)


if __name__ == "__main__":
    main()
